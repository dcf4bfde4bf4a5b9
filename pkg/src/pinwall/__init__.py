"""pinwall: transfer-operator toolkit for pinned interfaces above a hard wall.

A restricted solid-on-surface interface with a contact weight at the wall and
a long-range 1/n^2 attraction is solved through the minimal positive solution
of its transfer operator: critical contact weights, localization density,
inverse correlation length, closed forms for the hypergeometric potential
family, critical-scaling fits, exact finite-size ensembles and Monte Carlo
sampling of the localized walk.
"""

from .errors import (
    ConvergenceError,
    DivergenceError,
    ParameterError,
    RegimeError,
    ResourceError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DivergenceError",
    "ParameterError",
    "RegimeError",
    "ResourceError",
    "__version__",
]
