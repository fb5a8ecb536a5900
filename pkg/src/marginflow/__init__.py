"""marginflow: adaptive-optimizer trajectories on homogeneous models,
their margin diagnostics, and exact max-margin certification."""

__version__ = "0.1.0"

from .data import Dataset, generate, load_csv, save_csv
from .errors import (
    AssumptionError,
    ConfigError,
    DomainError,
    MarginflowError,
    NumericError,
)
from .losses import LossSpec, g_eval, log_inv_loss, loss_value
from .models import (
    ModelSpec,
    ParamVector,
    check_homogeneity,
    euler_identity_residual,
    margin_gradient,
    predict_margins,
)
from .optim import NormalizedView, OptimizerConfig, OptimizerState, normalize_view
from .problem import Problem, loss_gradient

__all__ = [
    "Dataset", "generate", "load_csv", "save_csv",
    "MarginflowError", "ConfigError", "NumericError", "AssumptionError", "DomainError",
    "LossSpec", "g_eval", "loss_value", "log_inv_loss",
    "ModelSpec", "ParamVector", "predict_margins", "margin_gradient",
    "check_homogeneity", "euler_identity_residual",
    "OptimizerConfig", "OptimizerState", "NormalizedView", "normalize_view",
    "Problem", "loss_gradient",
    "__version__",
]
