"""Structured spinner projections: fast transforms, kernel features, LSH and sketching."""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    DomainError,
    NonFiniteError,
    SingularSystemError,
    SpinnerError,
    StepFailure,
)
from .spinner import (
    FitResult,
    SpinnerSpec,
    StackedSpinner,
    StructuredSpinner,
    Variant,
    build,
    fit_to_target,
    stack,
)
from .transforms import (
    CirculantSpec,
    circulant_matvec,
    fwht_normalized,
    skew_circulant_matvec,
    toeplitz_matvec,
)

__all__ = [
    "CirculantSpec",
    "DimensionError",
    "DomainError",
    "FitResult",
    "NonFiniteError",
    "SingularSystemError",
    "SpinnerError",
    "SpinnerSpec",
    "StackedSpinner",
    "StepFailure",
    "StructuredSpinner",
    "Variant",
    "__version__",
    "build",
    "circulant_matvec",
    "fit_to_target",
    "fwht_normalized",
    "skew_circulant_matvec",
    "stack",
    "toeplitz_matvec",
]
