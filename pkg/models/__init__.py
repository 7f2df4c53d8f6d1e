from models.core import Alphabet, FiniteAlgebra, Partition, Word, WordDistribution
from models.diagnostic import DiagnosticReport
from models.entropy import EntropyEstimate, EpsIndependence
from models.experiment import ExperimentConfig, ExperimentResult, TrialRecord
from models.metric import Coupling, TransportResult
from models.system import (
    BernoulliShift,
    CellDrivenCocycle,
    ConstantCocycle,
    FiberMap,
    FinitePermutation,
    Induced,
    MarkovShift,
    RandomCocycle,
    RelIndepProduct,
    RotationCoding,
    SkewProduct,
    TfTriple,
    TrajectorySample,
)
