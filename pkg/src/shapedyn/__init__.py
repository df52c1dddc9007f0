"""Elastic shape dynamics of closed contours.

Contour sequences are mapped to low-dimensional Euclidean time series
(TSRVF-PCA), modeled with VAR and DCC-GARCH, and summarized by model
parameters for synthesis, prediction and classification.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AntipodalError,
    ConvergenceError,
    DegenerateContourError,
    DegenerateRegressorsError,
    InsufficientDataError,
    ShapeDynError,
    SingularCorrelationError,
)
