"""Smolyak sparse-grid quadrature with nested Clenshaw-Curtis rules.

All rules integrate against the uniform probability measure on [-1,1]^d
(weights of every grid sum to 1). The 1-D growth rule is 1, 3, 5, 9, ...,
i.e. level 0 is the single point {0} and level l >= 1 uses the 2^l + 1
cosine extrema. Sparse grids are built from tensor products of difference
rules, which handles nesting and point deduplication naturally.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

DEFAULT_POINT_CAP = 5 * 10**6

# Coordinates agreeing to this many decimals are merged into one grid point.
_MERGE_DECIMALS = 13


class PointCapError(RuntimeError):
    pass


def cc_points_1d(level: int) -> np.ndarray:
    """Nested Clenshaw-Curtis points: {0} at level 0, cos(pi k / 2^l) above."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level == 0:
        return np.array([0.0])
    n = 2**level
    k = np.arange(n + 1)
    return np.cos(math.pi * k / n)[::-1].copy()  # ascending, -1 .. 1


def cc_weights_1d(level: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the probability measure dy/2 (sum to 1).

    Uses the classical cosine-sum formula for the n+1 point rule; exact for
    all polynomials the rule integrates (degree n, plus odd symmetry).
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level == 0:
        return np.array([1.0])
    n = 2**level
    theta = math.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    # n is even for every level >= 1
    for k in range(1, n // 2):
        v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k * k - 1.0)
    v -= np.cos(n * theta[ii]) / (n * n - 1.0)
    w[0] = w[n] = 1.0 / (n * n - 1.0)
    w[ii] = 2.0 * v / n
    w = w[::-1] / 2.0  # match ascending point order; normalize to probability
    return w.copy()


def _difference_rules(max_level: int) -> list[dict[float, float]]:
    """1-D difference rules delta_l = U_l - U_(l-1) as point -> weight maps."""
    rules = []
    prev: dict[float, float] = {}
    for level in range(max_level + 1):
        pts = cc_points_1d(level)
        wts = cc_weights_1d(level)
        cur = {round(float(p), _MERGE_DECIMALS) + 0.0: float(w) for p, w in zip(pts, wts)}
        diff = dict(cur)
        for p, w in prev.items():
            diff[p] = diff.get(p, 0.0) - w
        rules.append(diff)
        prev = cur
    return rules


def _level_multi_indices(d: int, level: int):
    """Sparse multi-indices k with |k|_1 <= level, as ((dim, k_dim>0), ...)."""
    yield ()
    for total in range(1, level + 1):
        for n_active in range(1, min(d, total) + 1):
            for dims in combinations(range(d), n_active):
                for comp in _compositions(total, n_active):
                    yield tuple(zip(dims, comp))


def _compositions(total: int, parts: int):
    """All tuples of `parts` positive integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class SparseGrid:
    """Deduplicated sparse-grid points and signed weights summing to 1."""

    dim: int
    level: int
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        wts = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape != (len(wts), self.dim):
            raise ValueError("points and weights shapes are inconsistent")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {wts.sum()}, expected 1")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self) -> int:
        return len(self.weights)


def smolyak_grid(d: int, level: int, cap: int = DEFAULT_POINT_CAP) -> SparseGrid:
    """Smolyak combination of nested 1-D Clenshaw-Curtis rules.

    Points appearing in several tensor terms are merged with their weights
    combined; negative weights are legitimate. The d=30, level-2 grid has
    2d^2 + 2d + 1 = 1861 points.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if level < 0:
        raise ValueError("level must be nonnegative")
    diff = _difference_rules(level)
    # compensated (Kahan) accumulation: heavily shared points such as the
    # origin receive thousands of near-cancelling contributions
    accum: dict[tuple, list[float]] = {}
    for kvec in _level_multi_indices(d, level):
        # dimensions absent from kvec sit at level 0: point 0.0, weight 1
        point_lists = [list(diff[kd].items()) for _, kd in kvec]
        for combo in product(*point_lists):
            w = 1.0
            key = []
            for (dim, _), (p, pw) in zip(kvec, combo):
                w *= pw
                if p != 0.0:
                    key.append((dim, p))
            key = tuple(key)
            entry = accum.get(key)
            if entry is None:
                accum[key] = [w, 0.0]
                if len(accum) > cap:
                    raise PointCapError(f"sparse grid would exceed point cap {cap}")
            else:
                s, c = entry
                yv = w - c
                t = s + yv
                entry[0] = t
                entry[1] = (t - s) - yv
    keys = sorted(accum.keys())
    points = np.zeros((len(keys), d))
    weights = np.empty(len(keys))
    for i, key in enumerate(keys):
        for dim, p in key:
            points[i, dim] = p
        weights[i] = accum[key][0]
    return SparseGrid(d, level, points, weights)


def monte_carlo_grid(d: int, n: int, seed: int = 0) -> SparseGrid:
    """Uniform Monte Carlo fallback in the same container (equal weights)."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(-1.0, 1.0, size=(n, d))
    return SparseGrid(d, -1, points, np.full(n, 1.0 / n))


def bochner_error(reference, approx, grid: SparseGrid, gram=None) -> float:
    """Weighted root-mean-square distance over the grid.

    Computes sqrt(sum_i w_i ||ref_i - approx_i||^2) where the norm is the
    Gram-weighted norm when ``gram`` is given (dense or sparse matrix, or a
    DiscreteHilbertSpace) and Euclidean otherwise. Signed sparse-grid weights
    can make the total slightly negative for non-polynomial integrands; such
    totals clamp to zero with a warning.
    """
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    vals = approx(grid.points) if callable(approx) else approx
    vals = np.atleast_2d(np.asarray(vals, dtype=float))
    if ref.shape != vals.shape or ref.shape[0] != len(grid):
        raise ValueError(
            f"shape mismatch: reference {ref.shape}, approx {vals.shape}, grid {len(grid)}"
        )
    diff = ref - vals
    if gram is None:
        sq = np.einsum("ij,ij->i", diff, diff)
    elif hasattr(gram, "apply_gram"):
        sq = np.einsum("ij,ij->i", diff, gram.apply_gram(diff))
    else:
        gd = gram @ diff.T
        gd = np.asarray(gd.T if hasattr(gd, "T") else gd)
        sq = np.einsum("ij,ij->i", diff, gd.reshape(diff.shape))
    total = float(np.dot(grid.weights, sq))
    if total < 0.0:
        if total < -1e-12:
            warnings.warn(
                f"negative quadrature total {total}; clamping to zero", RuntimeWarning
            )
        total = 0.0
    return math.sqrt(total)
