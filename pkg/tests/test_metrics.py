import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors.ergolab_error import DimensionError, ParameterError
from models.core import Word, WordDistribution
from models.system import FinitePermutation
from services.metric_service import MetricService
from tests.oracles import lcs_table, transport_by_vertices

equal_length_words = st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(*[st.lists(st.integers(min_value=0, max_value=2), min_size=n, max_size=n)] * 2))


def test_dbar_words():
    assert MetricService.dbar_words([0, 1, 0, 1], [1, 1, 0, 0]) == 0.5
    assert MetricService.dbar_words(Word(symbols=(0, 1)), Word(symbols=(0, 1))) == 0.0


def test_fbar_shifted_period_two():
    assert MetricService.fbar_words([0, 1, 0, 1], [1, 0, 1, 0]) == 0.25


def test_word_length_mismatch():
    with pytest.raises(DimensionError):
        MetricService.fbar_words([0, 1], [0, 1, 0])
    with pytest.raises(DimensionError):
        MetricService.dbar_words([0], [0, 1])


@settings(max_examples=200)
@given(equal_length_words)
def test_lcs_matches_dynamic_programming(words):
    u, v = words

    assert MetricService.lcs_length(u, v) == lcs_table(u, v)


@settings(max_examples=200)
@given(equal_length_words)
def test_fbar_never_exceeds_dbar(words):
    u, v = words

    assert MetricService.fbar_words(u, v) <= MetricService.dbar_words(u, v) + 1e-12


@pytest.mark.parametrize("n", range(1, 7))
def test_fbar_triangle_inequality_on_all_binary_words(n):
    words = np.array(list(itertools.product((0, 1), repeat=n)))
    costs = MetricService.lcs_costs(words, words)

    detour = costs[:, :, None] + costs[None, :, :]

    assert np.all(costs[:, None, :] <= detour + 1e-12)
    np.testing.assert_allclose(costs, costs.T)


def test_dbar_distributions_example():
    p = WordDistribution.uniform([(0, 0), (1, 1)])
    q = WordDistribution.uniform([(0, 1), (1, 0)])

    result = MetricService.dbar_distributions(p, q)

    assert result.value == pytest.approx(0.5)
    assert result.method == "exact"
    assert result.lower_bound == result.upper_bound == result.value


def test_distance_to_itself_is_zero():
    p = WordDistribution(length=2, weights={(0, 0): 0.2, (0, 1): 0.3, (1, 1): 0.5})

    assert MetricService.dbar_distributions(p, p).value == pytest.approx(0.0, abs=1e-12)
    assert MetricService.fbar_distributions(p, p).value == pytest.approx(0.0, abs=1e-12)


def test_distribution_length_mismatch():
    with pytest.raises(DimensionError):
        MetricService.dbar_distributions(WordDistribution.point_mass((0,)), WordDistribution.point_mass((0, 1)))


@pytest.mark.parametrize("seed", range(5))
def test_exact_transport_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    costs = rng.random((3, 3))
    words = np.arange(3)[:, None]

    result = MetricService.transport(words, words, p, q, costs)

    assert result.value == pytest.approx(transport_by_vertices(p, q, costs), abs=1e-9)
    np.testing.assert_allclose(result.coupling.joint.sum(axis=1), p, atol=1e-9)
    np.testing.assert_allclose(result.coupling.joint.sum(axis=0), q, atol=1e-9)


@pytest.mark.parametrize("metric", ["dbar", "fbar"])
def test_bounded_path_brackets_the_optimum(metric):
    rng = np.random.default_rng(7)
    words = [tuple(w) for w in itertools.product((0, 1), repeat=4)]
    p = WordDistribution(length=4, weights=dict(zip(words, rng.dirichlet(np.ones(16)))))
    q = WordDistribution(length=4, weights=dict(zip(words, rng.dirichlet(np.ones(16)))))
    distance = MetricService.dbar_distributions if metric == "dbar" else MetricService.fbar_distributions

    exact = distance(p, q)
    bounded = distance(p, q, exact_limit=1)

    assert bounded.method == "bounded"
    assert bounded.lower_bound - 1e-9 <= exact.value <= bounded.upper_bound + 1e-9
    assert bounded.provenance()["support_sizes"] == [16, 16]


def test_weak_distance_example():
    identity = FinitePermutation(sigma=(0, 1, 2, 3))
    swap = FinitePermutation(sigma=(1, 0, 2, 3))

    assert MetricService.weak_distance(identity, swap, [{0}], 1) == 0.5
    assert MetricService.weak_distance(swap, swap, [{0}, {1, 2}]) == 0.0


def test_weak_distance_validation():
    identity = FinitePermutation(sigma=(0, 1))
    with pytest.raises(ParameterError):
        MetricService.weak_distance(identity, identity, [{0}], 2)
    with pytest.raises(DimensionError):
        MetricService.weak_distance(identity, FinitePermutation(sigma=(0, 1, 2)), [{0}])
