"""Input-validation helpers shared across the package.

These normalise user-supplied arrays to float64 numpy arrays and raise
:class:`~groupdistill.exceptions.ValidationError` with a message that names
the offending argument.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError

#: Vectors with a Euclidean norm at or below this are treated as zero-norm.
NORM_FLOOR = 1e-12


def as_float_vector(x, name: str = "x", require_finite: bool = True) -> np.ndarray:
    """Coerce *x* to a 1-D float64 array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if require_finite and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_float_matrix(x, name: str = "X", require_finite: bool = True) -> np.ndarray:
    """Coerce *x* to a 2-D float64 array (a single vector is not accepted)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if require_finite and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_label_vector(y, name: str = "y") -> np.ndarray:
    """Coerce *y* to a 1-D int64 label array."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=float)
        if not np.all(np.isfinite(rounded)) or not np.all(rounded == np.floor(rounded)):
            raise ValidationError(f"{name} must contain integer class labels")
    return arr.astype(np.int64)


def check_same_length(a, b, name_a: str, name_b: str) -> None:
    if len(a) != len(b):
        raise ValidationError(
            f"{name_a} and {name_b} must have the same length "
            f"({len(a)} != {len(b)})"
        )


def check_nonzero_norm(v: np.ndarray, name: str = "vector") -> float:
    """Return the Euclidean norm of *v*, rejecting (near-)zero vectors."""
    norm = float(np.linalg.norm(v))
    if not norm > NORM_FLOOR:
        raise ValidationError(f"{name} has (near-)zero norm {norm!r}")
    return norm
