import logging

from fastapi import Depends, FastAPI, HTTPException

from errors.ergolab_error import ErgolabError, PreconditionRefusedError
from models.core import WordDistribution
from models.diagnostic import DiagnosticReport
from pydantic_models.diagnostic import RelmixIn, RwmIn, SampleDiagnosticIn
from pydantic_models.entropy import EntropyIn, EntropyOut
from pydantic_models.metric import DistanceOut, DistributionIn, DistributionPairIn, WordPairIn
from services.diagnostic_service import DiagnosticService
from services.entropy_service import EntropyService
from services.metric_service import MetricService
from services.system_service import SystemService
from settings import VERSION, ErgolabSettings, get_settings

app = FastAPI(title="ergolab", version=VERSION)

WORD_METRICS = {"dbar": MetricService.dbar_words, "fbar": MetricService.fbar_words}
DISTRIBUTION_METRICS = {"dbar": MetricService.dbar_distributions, "fbar": MetricService.fbar_distributions}


def run(operation, *args, **kwargs):
    """Calls a service operation, translating library errors into HTTP errors."""
    try:
        return operation(*args, **kwargs)
    except PreconditionRefusedError as e:
        logging.warning(e.message)
        raise HTTPException(status_code=409, detail=e.message)
    except ErgolabError as e:
        logging.exception(e)
        raise HTTPException(status_code=400, detail=e.message)


def to_distribution(distribution: DistributionIn) -> WordDistribution:
    weights = {tuple(int(s) for s in word.split()): p for word, p in distribution.weights.items()}
    try:
        return WordDistribution(length=len(next(iter(weights))), weights=weights)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))


@app.get("/health")
def health():
    return {"status": "ok", "version": VERSION}


@app.post("/metrics/{metric}/words", response_model=DistanceOut)
def word_distance(metric: str, words: WordPairIn):
    if metric not in WORD_METRICS:
        raise HTTPException(status_code=404, detail=f"Unknown metric {metric}")
    value = run(WORD_METRICS[metric], words.first, words.second)
    return DistanceOut(value=value, lower_bound=value, upper_bound=value, support_sizes=(1, 1))


@app.post("/metrics/{metric}/distributions", response_model=DistanceOut)
def distribution_distance(metric: str, pair: DistributionPairIn, settings: ErgolabSettings = Depends(get_settings)):
    if metric not in DISTRIBUTION_METRICS:
        raise HTTPException(status_code=404, detail=f"Unknown metric {metric}")
    result = run(DISTRIBUTION_METRICS[metric], to_distribution(pair.first), to_distribution(pair.second),
                 pair.exact_limit or settings.exact_limit)
    return DistanceOut(value=result.value, **result.provenance())


@app.post("/entropy", response_model=EntropyOut)
def entropy(request: EntropyIn):
    estimate = run(EntropyService.entropy_rate_estimate, request.sample, request.n, request.k)
    if request.bits:
        estimate = estimate.in_bits()
    return EntropyOut(value=estimate.value, units=estimate.units, standard_error=estimate.standard_error,
                      flags=estimate.flags)


@app.post("/diagnostics/rwm", response_model=DiagnosticReport)
def rwm(request: RwmIn):
    extension = run(SystemService.skew_product, request.system.base, request.system.cocycle,
                    request.system.fiber_grid)
    pairs = run(DiagnosticService.pair_family, extension, request.pairs)
    return run(DiagnosticService.rwm_verdict, extension, pairs, request.schedule, request.past, request.tol,
               request.windows, request.seed)


@app.post("/diagnostics/relmix", response_model=DiagnosticReport)
def relmix(request: RelmixIn):
    extension = run(SystemService.skew_product, request.system.base, request.system.cocycle,
                    request.system.fiber_grid)
    observable = DiagnosticService.centered_fiber_half(extension)
    return run(DiagnosticService.relative_mixing_statistic, extension, observable, observable, request.lag,
               request.windows, request.seed)


@app.post("/diagnostics/{name}", response_model=DiagnosticReport)
def sample_diagnostic(name: str, request: SampleDiagnosticIn):
    if name == "vwb":
        return run(DiagnosticService.vwb_statistic, request.sample, request.n, request.k, request.eps, request.floor)
    if name == "vlb":
        return run(DiagnosticService.vlb_statistic, request.sample, request.n, request.k, request.eps, request.floor)
    if name == "vlb-zero":
        return run(DiagnosticService.vlb_zero_entropy, request.sample, request.n, request.eps, floor=request.floor)
    if name == "kcheck":
        return run(DiagnosticService.k_property_check, request.sample, request.n, request.k0, request.k1,
                   request.eps, request.delta)
    raise HTTPException(status_code=404, detail=f"Unknown diagnostic {name}")
