"""Orthonormal Legendre polynomials on [-1,1]^d under the uniform probability measure.

The univariate basis is psi_n(y) = sqrt(2n+1) * P_n(y) with P_n the classical
Legendre polynomial, so that int psi_n psi_m dy/2 = delta_nm. Tensor basis
functions are products of univariate ones; the normalized sample matrix has
entries psi_{nu_j}(y_i) / sqrt(m).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .multiindex import MultiIndexSet

DOMAIN_TOL = 1e-12


def _clamp_domain(y: np.ndarray) -> np.ndarray:
    """Clamp values within DOMAIN_TOL of [-1,1]; reject anything farther out."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > 1.0 + DOMAIN_TOL):
        worst = float(np.max(np.abs(y)))
        raise ValueError(f"sample coordinate outside [-1,1]: |y| = {worst}")
    return np.clip(y, -1.0, 1.0)


def legendre_1d_table(nmax: int, y) -> np.ndarray:
    """Evaluate psi_0, ..., psi_nmax at points y via the three-term recurrence.

    Returns an array of shape y.shape + (nmax+1,).
    """
    y = _clamp_domain(y)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.empty(y.shape + (nmax + 1,))
    p_prev = np.ones_like(y)
    out[..., 0] = p_prev
    if nmax >= 1:
        p_cur = y.copy()
        out[..., 1] = np.sqrt(3.0) * p_cur
        for n in range(1, nmax):
            p_next = ((2 * n + 1) * y * p_cur - n * p_prev) / (n + 1)
            out[..., n + 1] = np.sqrt(2 * n + 3.0) * p_next
            p_prev, p_cur = p_cur, p_next
    return out[0] if scalar else out


def legendre_1d(nu: int, y):
    """Orthonormal Legendre value psi_nu(y) = sqrt(2 nu + 1) P_nu(y)."""
    if nu < 0:
        raise ValueError("degree must be nonnegative")
    table = legendre_1d_table(nu, y)
    return table[..., nu]


def legendre_tensor(nu, y):
    """Tensor-product value psi_nu(y) = prod_k psi_{nu_k}(y_k)."""
    nu = np.asarray(nu, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    if nu.shape != y.shape:
        raise ValueError(f"dimension mismatch: index {nu.shape}, point {y.shape}")
    val = 1.0
    for k in range(len(nu)):
        val *= legendre_1d(int(nu[k]), y[k])
    return float(val)


def evaluate_basis(S: MultiIndexSet, points) -> np.ndarray:
    """Matrix of un-normalized basis values, shape (m, N), columns in set order."""
    points = _clamp_domain(points)
    points = np.atleast_2d(points)
    if points.shape[1] != S.dim:
        raise ValueError(
            f"points have dimension {points.shape[1]}, index set has {S.dim}"
        )
    m = points.shape[0]
    nmax = int(S.indices.max()) if len(S) else 0
    # per-dimension tables (m, nmax+1), then product over dimensions
    vals = np.ones((m, len(S)))
    for k in range(S.dim):
        table = legendre_1d_table(nmax, points[:, k])
        vals *= table[:, S.indices[:, k]]
    return vals


@dataclass(frozen=True)
class MeasurementMatrix:
    """Normalized Legendre sample matrix A with A_ij = psi_{nu_j}(y_i)/sqrt(m)."""

    matrix: np.ndarray
    index_set: MultiIndexSet

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[1] != len(self.index_set):
            raise ValueError("matrix shape inconsistent with index set")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def assemble_measurement_matrix(S: MultiIndexSet, points) -> MeasurementMatrix:
    """Assemble the m x N normalized sample matrix for index set S at the points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    if m == 0:
        raise ValueError("empty point list")
    A = evaluate_basis(S, points) / np.sqrt(m)
    return MeasurementMatrix(A, S)


def theta_bound(S: MultiIndexSet) -> float:
    """Exact sup-norm bound max_nu ||psi_nu||_inf = max_nu prod_k sqrt(2 nu_k + 1).

    The maximum of each tensor basis function is attained at y = (1,...,1).
    """
    if len(S) == 0:
        raise ValueError("empty multi-index set")
    return float(np.sqrt(np.prod(2.0 * S.indices + 1.0, axis=1)).max())
