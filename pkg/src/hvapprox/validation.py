"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .polybasis import DOMAIN_TOL


def check_parameter_array(Y, dim: int | None = None) -> np.ndarray:
    """Validate a (m, d) array of parameter points in [-1, 1]^d.

    Coordinates within DOMAIN_TOL of the cube are clamped; anything farther
    out raises. 1-D input is treated as a single point.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2:
        raise ValueError(f"parameter array must be 2-D, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("parameter array contains non-finite values")
    if np.any(np.abs(Y) > 1.0 + DOMAIN_TOL):
        raise ValueError("parameter coordinates must lie in [-1, 1]")
    if dim is not None and Y.shape[1] != dim:
        raise ValueError(f"expected parameter dimension {dim}, got {Y.shape[1]}")
    return np.clip(Y, -1.0, 1.0)


def check_value_array(U, n_samples: int) -> np.ndarray:
    """Validate a (m, K) array of coefficient rows matching the sample count."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.ndim != 2:
        raise ValueError(f"value array must be 2-D, got shape {U.shape}")
    if U.shape[0] != n_samples:
        raise ValueError(
            f"value rows ({U.shape[0]}) do not match sample count ({n_samples})"
        )
    if not np.all(np.isfinite(U)):
        raise ValueError("value array contains non-finite values")
    return U
