"""Exact, asymptotic and Monte Carlo statistics of random permutation matrices
under generalized Ewens weights."""

__version__ = "0.1.0"

from .models import ThetaSequence, ewens, geometric_ewens, parse_model, perturbed_ewens, table_sequence  # noqa: E402
from .series import compute_h  # noqa: E402

__all__ = [
    "__version__",
    "ThetaSequence",
    "compute_h",
    "ewens",
    "geometric_ewens",
    "parse_model",
    "perturbed_ewens",
    "table_sequence",
]
