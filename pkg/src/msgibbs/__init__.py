"""msgibbs: multiscale maximum-entropy and minimum-relative-entropy
distributions, their Gaussian closed forms, and excess-risk bound tooling."""

__version__ = "0.1.0"

from . import bounds, errors, gaussian, multiscale, nn, oracle, tabular
from .tolerances import TOL, Tolerances

__all__ = [
    "__version__",
    "TOL",
    "Tolerances",
    "bounds",
    "errors",
    "gaussian",
    "multiscale",
    "nn",
    "oracle",
    "tabular",
]
