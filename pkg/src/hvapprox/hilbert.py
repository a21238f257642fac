"""Discretized Hilbert spaces, Gram-weighted norms and Hilbert-valued vectors.

A ``DiscreteHilbertSpace`` wraps the K x K Gram matrix G of a basis of the
discretization V_h. Coordinate vectors c represent elements sum_k c_k phi_k,
whose norm is sqrt(c' G c). A ``HilbertVector`` is an N x K array whose rows
are the coordinates of N space elements; block norms over the rows give the
l^p(V) norms used by the recovery solvers and the error metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

# Block V-norms below this are treated as exact zeros in support computations.
SUPPORT_NOISE_FLOOR = 1e-14

_SPARSE_DENSITY_CUTOFF = 0.05


class DiscreteHilbertSpace:
    """Basis size K, SPD Gram matrix G and a factor R with R' R = G.

    Any factor R with R' R = G induces the same norms; the implementation uses
    the upper Cholesky factor. Construction fails if G is not symmetric
    positive definite.
    """

    def __init__(self, gram, label: str = "custom"):
        if scipy.sparse.issparse(gram):
            self._gram_sparse = gram.tocsr()
            gram = np.asarray(gram.todense(), dtype=float)
        else:
            gram = np.asarray(gram, dtype=float)
            self._gram_sparse = None
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise ValueError("Gram matrix must be square")
        scale = max(1.0, float(np.abs(gram).max()))
        if np.abs(gram - gram.T).max() > 1e-12 * scale:
            raise ValueError("Gram matrix is not symmetric to 1e-12 relative")
        gram = 0.5 * (gram + gram.T)
        try:
            factor = scipy.linalg.cholesky(gram)  # upper: R' R = G
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("Gram matrix is not positive definite") from exc
        gram.setflags(write=False)
        factor.setflags(write=False)
        self.gram = gram
        self.gram_sqrt = factor
        self.label = label
        if self._gram_sparse is None:
            nnz = np.count_nonzero(gram)
            if nnz < _SPARSE_DENSITY_CUTOFF * gram.size:
                self._gram_sparse = scipy.sparse.csr_matrix(gram)
        self._cho = (factor, False)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def apply_gram(self, X: np.ndarray) -> np.ndarray:
        """Rows of X times G, using a sparse product when G is sparse."""
        if self._gram_sparse is not None:
            return np.asarray((self._gram_sparse @ X.T).T)
        return X @ self.gram

    def to_factor_coords(self, X: np.ndarray) -> np.ndarray:
        """Map rows x -> x R' so that Euclidean row norms equal V-norms."""
        return X @ self.gram_sqrt.T

    def from_factor_coords(self, W: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_factor_coords` (solve against R')."""
        return scipy.linalg.solve_triangular(
            self.gram_sqrt, W.T, trans="T", lower=False
        ).T

    def norms(self, X: np.ndarray) -> np.ndarray:
        """V-norms of the rows of an (N, K) coordinate array."""
        X = np.atleast_2d(X)
        return np.sqrt(np.maximum(np.einsum("ij,ij->i", X, self.apply_gram(X)), 0.0))


@dataclass(frozen=True)
class HilbertElement:
    """Coordinates of a single element of V_h."""

    space: DiscreteHilbertSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != self.space.dim:
            raise ValueError("coefficient length does not match space dimension")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(self.space.norms(self.coeffs[None, :])[0])


@dataclass(frozen=True)
class HilbertVector:
    """N x K coordinate array: row j holds the coordinates of the j-th entry."""

    space: DiscreteHilbertSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.asarray(self.coeffs, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.space.dim:
            raise ValueError("coeffs must be (N, K) with K the space dimension")
        object.__setattr__(self, "coeffs", z)

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def block_norms(self) -> np.ndarray:
        return self.space.norms(self.coeffs)


def norm_vp(v: HilbertVector, p) -> float:
    """Block norm ||v||_{V,p} for p in {1, 2, inf}."""
    norms = v.block_norms()
    if p == 1:
        return float(norms.sum())
    if p == 2:
        return float(np.sqrt((norms**2).sum()))
    if p in (np.inf, float("inf"), "inf"):
        return float(norms.max()) if len(norms) else 0.0
    raise ValueError("p must be 1, 2 or infinity")


def support(v: HilbertVector, tol: float = SUPPORT_NOISE_FLOOR) -> np.ndarray:
    """Indices whose block V-norm exceeds tol (at least the noise floor)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    tol = max(tol, SUPPORT_NOISE_FLOOR)
    return np.flatnonzero(v.block_norms() > tol)


def best_s_term_error(v: HilbertVector, s: int, p) -> float:
    """Error of the best s-term approximation in the block l^p(V) norm.

    The infimum is attained by zeroing the s largest block norms, so the
    value is the l^p norm of the remaining (smallest) block norms.
    """
    n = len(v)
    if not 0 <= s <= n:
        raise ValueError(f"s must lie in [0, {n}]")
    norms = np.sort(v.block_norms())[::-1]
    tail = norms[s:]
    if p == 1:
        return float(tail.sum())
    if p == 2:
        return float(np.sqrt((tail**2).sum()))
    raise ValueError("p must be 1 or 2")


def project_L2(space: DiscreteHilbertSpace, rhs) -> HilbertElement:
    """Orthogonal projection onto V_h: solve G c = rhs with rhs_k = <f, phi_k>_V."""
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if rhs.shape[0] != space.dim:
        raise ValueError("rhs length does not match space dimension")
    c = scipy.linalg.cho_solve(space._cho, rhs)
    return HilbertElement(space, c)


def identity_space(K: int) -> DiscreteHilbertSpace:
    """Euclidean space of dimension K (G = I); handy for scalar-valued problems."""
    return DiscreteHilbertSpace(np.eye(K), label="euclidean")
