"""Tolerance-aware sequence prediction.

Lab measurements come with tolerance regions: any value inside the
region is acceptable. This package trains an LSTM predictor whose
objective integrates the prediction error over a discretized version of
each training sample's tolerance region, via a staged curriculum over
perturbed datasets, and evaluates stability against a plain
least-squares baseline under imprecise test inputs.
"""

from .errors import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    InvalidArgumentError,
    IrlossError,
    ParseError,
    ShapeError,
)
from .kernels import BACKEND, NUMBA_AVAILABLE, active_backend

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "NUMBA_AVAILABLE",
    "active_backend",
    "CheckpointError",
    "ConfigError",
    "DivergenceError",
    "InvalidArgumentError",
    "IrlossError",
    "ParseError",
    "ShapeError",
    "__version__",
]
