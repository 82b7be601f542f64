"""Sum-stack-softplus regression with an upward-downward Gibbs sampler."""

from .data import RawTable, PartitionSpec, generate_synthetic, load_partition
from .errors import (
    DataError,
    DimensionError,
    NumericalError,
    ParameterError,
    SoftplusError,
    VersionMismatchError,
)
from .geometry import (
    GeometryReport,
    gh_recursions,
    ss_union_membership,
    stack_criteria_satisfied,
    sum_polytope_violations,
)
from .gibbs import ChainDiverged, RunResult, Trace, run
from .io import load_model, save_model
from .model import (
    Dataset,
    FittedModel,
    FusedModel,
    HyperParams,
    Standardization,
    classify,
    fused_prob,
    log_likelihood,
    positive_prob,
    predict_prob,
    q_recursion,
    rate,
    softplus,
    stack_softplus,
)
from ._version import __version__

__all__ = [
    "__version__",
    "ChainDiverged",
    "classify",
    "DataError",
    "Dataset",
    "DimensionError",
    "FittedModel",
    "fused_prob",
    "FusedModel",
    "generate_synthetic",
    "GeometryReport",
    "gh_recursions",
    "HyperParams",
    "load_model",
    "load_partition",
    "log_likelihood",
    "NumericalError",
    "ParameterError",
    "PartitionSpec",
    "positive_prob",
    "predict_prob",
    "q_recursion",
    "rate",
    "RawTable",
    "run",
    "RunResult",
    "save_model",
    "softplus",
    "SoftplusError",
    "ss_union_membership",
    "stack_criteria_satisfied",
    "stack_softplus",
    "Standardization",
    "sum_polytope_violations",
    "Trace",
    "VersionMismatchError",
]
