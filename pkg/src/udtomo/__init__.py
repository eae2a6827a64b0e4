"""Numerical tests of whether a pure state is uniquely determined by a set of
measurements, among pure states (UDP) or among all states (UDA)."""

from .alm import (
    ALMConfig,
    AdamConfig,
    Category,
    SolveResult,
    UniquenessVerdict,
    alm_solve,
    augmented_objective,
    classify,
    classify_many,
    determine_uda,
    determine_udp,
)
from .errors import (
    DegenerateParamsError,
    DimensionError,
    FormError,
    HermiticityError,
    InfeasibleError,
    InvalidDensityError,
    NormError,
)
from .frameworks import (
    MeasurementFramework,
    gell_mann_framework,
    measurement_vector,
    pauli_2local_framework,
    reduced_symmetric_framework,
)
from .rank import RankBudget, RankSource, qst_rank_bound, rank_reduce, symmetric_uda_rank, uda_rank_bound
from .states import (
    EnsembleParams,
    ensemble_density,
    evaluate,
    ghz_state,
    random_pure_state,
    special_symmetric_state,
    symmetric_basis,
)

__version__ = "0.1.0"
