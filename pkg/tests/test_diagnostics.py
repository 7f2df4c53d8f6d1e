import itertools

import numpy as np
import pytest

from errors.ergolab_error import ConsistencyError, ParameterError
from models.core import Partition, WordDistribution
from models.system import FinitePermutation
from services.diagnostic_service import DiagnosticService
from services.metric_service import MetricService
from tests.oracles import frozen_fiber_ea


@pytest.mark.parametrize("past", [None, 1])
def test_ea_of_the_whole_space_is_zero(random_walk_extension, past):
    c, d = DiagnosticService.pair_family(random_walk_extension, ("whole",))[0]

    report = DiagnosticService.ea_statistic(random_walk_extension, c, d, 16, past, windows=64, seed=1)

    assert report.value == 0.0


@pytest.mark.parametrize("past", [None, 2])
def test_ea_of_a_frozen_fiber_matches_enumeration(frozen_extension, past):
    c, d = DiagnosticService.pair_family(frozen_extension, ("fiber_half",))[0]

    report = DiagnosticService.ea_statistic(frozen_extension, c, d, 64, past, windows=64, seed=2)

    assert report.value == pytest.approx(frozen_fiber_ea(4, {0, 1}, {0, 1}), abs=1e-12)
    assert report.value == pytest.approx(3 / 16, abs=1e-12)


def test_ea_decays_along_a_random_walk_fiber(random_walk_extension):
    c, d = DiagnosticService.pair_family(random_walk_extension, ("fiber_half",))[0]

    short = DiagnosticService.ea_statistic(random_walk_extension, c, d, 4, windows=128, seed=3).value
    long = DiagnosticService.ea_statistic(random_walk_extension, c, d, 1024, windows=128, seed=3).value

    assert long < 0.05
    assert long < short


def test_rwm_verdict_separates_frozen_from_walking_fibers(random_walk_extension, frozen_extension):
    walking = DiagnosticService.rwm_verdict(
        random_walk_extension, DiagnosticService.pair_family(random_walk_extension), [256, 1024], windows=128)
    frozen = DiagnosticService.rwm_verdict(
        frozen_extension, DiagnosticService.pair_family(frozen_extension), [256, 1024], windows=128)

    assert walking.verdict
    assert not frozen.verdict
    assert len(frozen.trace) == 2
    assert frozen.value == pytest.approx(3 / 16)


def test_rwm_verdict_needs_pairs(frozen_extension):
    with pytest.raises(ParameterError):
        DiagnosticService.rwm_verdict(frozen_extension, [], [16])


def test_unknown_pair_name(frozen_extension):
    with pytest.raises(ParameterError):
        DiagnosticService.pair_family(frozen_extension, ("everything",))


@pytest.mark.parametrize("projection", ["factor", "identity"])
def test_factor_rwm_of_constants_is_zero(random_walk_extension, projection):
    report = DiagnosticService.factor_rwm_statistic(random_walk_extension, lambda x, u: 1.0, lambda x, u: 1.0, 32,
                                                    projection=projection)

    assert report.value == 0.0


@pytest.mark.parametrize("n", [64, 1024])
def test_factor_rwm_sees_frozen_fibers(frozen_extension, n):
    coordinate = lambda x, u: u / 4  # noqa: E731

    report = DiagnosticService.factor_rwm_statistic(frozen_extension, coordinate, coordinate, n, windows=512,
                                                    projection="identity")

    assert report.value > 0.02


def test_vwb_passes_on_independent_symbols(iid_sample):
    report = DiagnosticService.vwb_statistic(iid_sample, 4, 4, 0.1)

    assert report.verdict
    assert report.value < 0.1
    assert report.flags == ()
    assert len(report.trace) == 16


def test_vwb_fails_on_period_two(period_two_sample):
    report = DiagnosticService.vwb_statistic(period_two_sample, 4, 2, 0.1)

    assert not report.verdict
    assert report.value == pytest.approx(0.5)


def test_vwb_flags_sparse_pasts(iid_sample):
    report = DiagnosticService.vwb_statistic(iid_sample[:2000], 2, 8, 0.1)

    assert "undersampled" in report.flags
    assert report.values["unresolved_mass"] > 0


def test_vlb_on_period_two(period_two_sample):
    report = DiagnosticService.vlb_statistic(period_two_sample, 4, 2, 0.1)
    between = MetricService.fbar_distributions(WordDistribution.point_mass((0, 1, 0, 1)),
                                               WordDistribution.point_mass((1, 0, 1, 0)))

    assert not report.verdict
    assert report.value == pytest.approx(0.125)
    assert between.value == pytest.approx(0.25)


def test_vlb_zero_entropy(period_two_sample, iid_sample):
    periodic = DiagnosticService.vlb_zero_entropy(period_two_sample, 4, 0.3)
    noisy = DiagnosticService.vlb_zero_entropy(iid_sample[:50_000], 8, 0.1)

    assert periodic.verdict
    assert periodic.parameters["method"] == "exhaustive"
    assert not noisy.verdict
    assert noisy.parameters["method"] == "greedy"


@pytest.mark.parametrize("seed", range(5))
def test_greedy_clique_never_beats_exhaustive_search(seed):
    vocabulary = np.array(list(itertools.product((0, 1), repeat=3)))
    masses = np.random.default_rng(seed).dirichlet(np.ones(8))

    greedy = DiagnosticService.greedy_clique(vocabulary, masses, 0.5)
    best = DiagnosticService.max_mass_clique(vocabulary, masses, 0.5)

    assert masses[greedy].sum() <= masses[best].sum() + 1e-12
    for i, j in itertools.combinations(best, 2):
        assert MetricService.fbar_words(vocabulary[i], vocabulary[j]) < 0.5


def test_k_property_check(iid_sample, period_two_sample, sturmian_sample):
    assert DiagnosticService.k_property_check(iid_sample, 4, 2, 6).verdict
    assert not DiagnosticService.k_property_check(period_two_sample, 4, 2, 6).verdict
    sturmian = DiagnosticService.k_property_check(sturmian_sample, 4, 2, 6)
    assert not sturmian.verdict
    assert sturmian.values["condition_two"] == 0.0


def test_k_property_check_validates_lags(iid_sample):
    with pytest.raises(ParameterError):
        DiagnosticService.k_property_check(iid_sample, 4, 3, 3)


def test_bernoulli_open_condition(iid_sample, period_two_sample):
    assert DiagnosticService.bernoulli_open_condition(iid_sample, 3, 3, 0.1, 0.1).verdict
    assert not DiagnosticService.bernoulli_open_condition(period_two_sample, 3, 3, 0.1, 0.1).verdict


def test_generator_gap_check():
    cycle = FinitePermutation(sigma=tuple((i + 1) % 8 for i in range(8)))
    halves = Partition(cell_of=(0,) * 4 + (1,) * 4, cell_count=2)

    coarse = DiagnosticService.generator_gap_check(cycle, halves, {0}, 0)
    fine = DiagnosticService.generator_gap_check(cycle, halves, {0}, 4)

    assert coarse.verdict and coarse.value == 0.125
    assert not fine.verdict and fine.value == 0.0


def test_relative_mixing_vanishes_for_base_observables(random_walk_extension):
    report = DiagnosticService.relative_mixing_statistic(
        random_walk_extension, lambda x, u: u / 8, lambda x, u: (x == 0) * 1.0, 5, windows=200)

    assert report.value == 0.0


def test_relative_mixing_at_lag_zero_is_the_fiber_variance(random_walk_extension):
    centered = lambda x, u: u / 8 - 7 / 16  # noqa: E731

    report = DiagnosticService.relative_mixing_statistic(random_walk_extension, centered, centered, 0, windows=50)

    assert report.value == pytest.approx(63 / 768, abs=1e-12)


@pytest.mark.parametrize("lag", [1, 5, 20])
def test_relative_mixing_of_a_frozen_fiber_stays_put(frozen_extension, lag):
    half = DiagnosticService.centered_fiber_half(frozen_extension)

    assert DiagnosticService.relative_mixing_statistic(frozen_extension, half, half, lag).value == pytest.approx(0.25)


def test_relative_mixing_formulas_must_agree(random_walk_extension, mocker):
    mocker.patch("services.diagnostic_service.math.sqrt", side_effect=[0.5, 0.6])
    half = DiagnosticService.centered_fiber_half(random_walk_extension)

    with pytest.raises(ConsistencyError):
        DiagnosticService.relative_mixing_statistic(random_walk_extension, half, half, 3, windows=20)


@pytest.mark.slow
def test_relative_product_correlation_agrees_with_relative_mixing(frozen_extension, shuffling_extension):
    frozen_half = DiagnosticService.centered_fiber_half(frozen_extension)
    shuffled_half = DiagnosticService.centered_fiber_half(shuffling_extension)

    frozen_mixing = DiagnosticService.relative_mixing_statistic(frozen_extension, frozen_half, frozen_half, 10)
    frozen_product = DiagnosticService.relative_product_correlation(frozen_extension, frozen_half, frozen_half, 10)
    shuffled_mixing = DiagnosticService.relative_mixing_statistic(shuffling_extension, shuffled_half,
                                                                  shuffled_half, 10)
    shuffled_product = DiagnosticService.relative_product_correlation(shuffling_extension, shuffled_half,
                                                                      shuffled_half, 10)

    assert frozen_mixing.value ** 2 == pytest.approx(frozen_product.value)
    assert frozen_product.value == pytest.approx(1 / 16)
    assert shuffled_mixing.value < 0.1
    assert shuffled_product.value < 0.01


@pytest.mark.slow
def test_sturmian_sample_is_loosely_but_not_weakly_bernoulli(sturmian_sample):
    assert DiagnosticService.vlb_statistic(sturmian_sample, 64, 8, 0.25).verdict
    assert DiagnosticService.vlb_zero_entropy(sturmian_sample, 64, 0.25).verdict
    assert not DiagnosticService.vwb_statistic(sturmian_sample, 64, 8, 0.25).verdict


@pytest.mark.parametrize("seed", range(100))
def test_relative_mixing_formulas_agree_on_random_observables(random_walk_extension, shuffling_extension, seed):
    rng = np.random.default_rng(seed)
    extension = shuffling_extension if seed % 2 else random_walk_extension
    size = 2 * extension.fiber_grid
    f, g = rng.normal(size=size), rng.normal(size=size)

    report = DiagnosticService.relative_mixing_statistic(extension, f, g, int(rng.integers(12)), windows=40, seed=seed)

    assert report.value == pytest.approx(report.values["centered"], abs=1e-9)


def test_verdicts_are_plain_bools(iid_sample, period_two_sample):
    reports = [
        DiagnosticService.vwb_statistic(iid_sample, 2, 2, 0.1),
        DiagnosticService.vlb_statistic(period_two_sample, 4, 2, 0.1),
        DiagnosticService.vlb_zero_entropy(period_two_sample, 4, 0.3),
        DiagnosticService.k_property_check(iid_sample, 2, 2, 4),
        DiagnosticService.bernoulli_open_condition(iid_sample, 3, 3, 0.1, 0.1),
    ]

    assert all(type(report.verdict) is bool for report in reports)
