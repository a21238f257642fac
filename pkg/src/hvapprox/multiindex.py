"""Multi-index sets for high-dimensional polynomial approximation.

Provides hyperbolic cross sets, anisotropic threshold sets and the lower-set
(downward closedness) machinery used throughout the package. Sets are stored
as integer arrays in a fixed canonical order so that measurement-matrix
columns and solver output are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CARDINALITY_CAP = 10**7

# Relative tolerance used when deciding membership on the boundary of an
# anisotropic set; boundary indices count as members.
_BOUNDARY_RTOL = 1e-12


class CardinalityCapError(RuntimeError):
    """Raised when an index-set enumeration would exceed the configured cap."""


def _canonical_order(indices: np.ndarray) -> np.ndarray:
    """Sort rows by total degree, ties broken with dimension 1 varying last.

    Within a degree block (1,0) precedes (0,1) and (2,0) precedes (0,2):
    ties compare entries lexicographically in descending order.
    """
    if len(indices) == 0:
        return indices
    keys = [indices[:, k] for k in range(indices.shape[1])]  # descending lex
    order = np.lexsort(keys[::-1] + [-indices.sum(axis=1)])[::-1]
    return indices[order]


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered set of distinct nonnegative multi-indices of a fixed dimension.

    Attributes
    ----------
    dim : ambient dimension d
    indices : (N, d) int array, rows in canonical (graded) order
    order_tag : provenance of the construction, e.g. {"kind": "hyperbolic_cross", "s": 4}
    """

    dim: int
    indices: np.ndarray
    order_tag: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.indices, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ValueError(f"indices must be (N, {self.dim}), got {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("multi-indices must be nonnegative")
        if len({tuple(row) for row in arr}) != len(arr):
            raise ValueError("duplicate multi-indices")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self.indices)

    def __contains__(self, nu) -> bool:
        return tuple(int(v) for v in nu) in self.as_set()

    def as_set(self) -> frozenset:
        return frozenset(tuple(int(v) for v in row) for row in self.indices)

    def is_subset_of(self, other: "MultiIndexSet") -> bool:
        return self.as_set() <= other.as_set()


def _enumerate_product_bound(d: int, s: int, cap: int) -> list[tuple[int, ...]]:
    """All nu in N_0^d with prod(nu_k + 1) <= s, depth-first over dimensions."""
    out: list[tuple[int, ...]] = []
    nu = [0] * d

    def recurse(k: int, budget: int):
        if k == d:
            out.append(tuple(nu))
            if len(out) > cap:
                raise CardinalityCapError(
                    f"index set would exceed cardinality cap {cap}"
                )
            return
        v = 0
        while v + 1 <= budget:
            nu[k] = v
            recurse(k + 1, budget // (v + 1))
            v += 1
        nu[k] = 0

    recurse(0, s)
    return out


def hyperbolic_cross(d: int, s: int, cap: int = DEFAULT_CARDINALITY_CAP) -> MultiIndexSet:
    """Hyperbolic cross set {nu : prod_k (nu_k + 1) <= s} in canonical order.

    The set is lower (downward closed) and contains the union of all lower
    sets of cardinality at most s. ``s = p + 1`` corresponds to the
    "cross of order p" convention used when reporting polynomial orders.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if s < 1:
        raise ValueError("s must be >= 1")
    rows = _enumerate_product_bound(d, s, cap)
    arr = _canonical_order(np.array(rows, dtype=np.int64).reshape(len(rows), d))
    return MultiIndexSet(d, arr, {"kind": "hyperbolic_cross", "s": s})


def anisotropic_set(
    rho, tau: float, cap: int = DEFAULT_CARDINALITY_CAP
) -> MultiIndexSet:
    """Threshold set {nu : prod_j rho_j^(-nu_j) >= tau} for rho_j > 1, tau in (0,1).

    Membership is tested in the log domain: sum_j nu_j*log(rho_j) <= log(1/tau),
    with boundary indices (relative tolerance 1e-12) counted as members.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or len(rho) < 1:
        raise ValueError("rho must be a 1-D vector")
    if np.any(rho <= 1.0):
        raise ValueError("all rho_j must be > 1")
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie in (0, 1)")
    d = len(rho)
    log_rho = np.log(rho)
    budget = math.log(1.0 / tau)
    slack = budget + _BOUNDARY_RTOL * max(1.0, abs(budget))

    out: list[tuple[int, ...]] = []
    nu = [0] * d

    def recurse(k: int, used: float):
        if k == d:
            out.append(tuple(nu))
            if len(out) > cap:
                raise CardinalityCapError(
                    f"index set would exceed cardinality cap {cap}"
                )
            return
        v = 0
        while used + v * log_rho[k] <= slack:
            nu[k] = v
            recurse(k + 1, used + v * log_rho[k])
            v += 1
        nu[k] = 0

    recurse(0, 0.0)
    arr = _canonical_order(np.array(out, dtype=np.int64).reshape(len(out), d))
    return MultiIndexSet(d, arr, {"kind": "anisotropic", "rho": rho.tolist(), "tau": tau})


def is_lower(S: MultiIndexSet) -> bool:
    """True iff S is downward closed under the componentwise partial order."""
    members = S.as_set()
    for nu in members:
        for k in range(S.dim):
            if nu[k] > 0:
                mu = nu[:k] + (nu[k] - 1,) + nu[k + 1 :]
                if mu not in members:
                    return False
    return True


def max_order(S: MultiIndexSet) -> int:
    """Maximum l1 norm over the set (the highest total polynomial degree)."""
    if len(S) == 0:
        raise ValueError("empty multi-index set")
    return int(S.indices.sum(axis=1).max())


def cardinality_bounds(d: int, s: int) -> tuple[float, float, float]:
    """Three closed-form upper bounds on |{nu : prod(nu_k+1) <= s}|.

    Returns ``(2 s^3 4^d, e^2 s^(2 + log d / log 2), s (log s + d log 2)^(d-1) / (d-1)!)``
    as floats (may overflow to inf); the convention 0! = 1 applies for d = 1.
    """
    if d < 1 or s < 1:
        raise ValueError("require d >= 1 and s >= 1")
    b1 = 2.0 * s**3 * 4.0**d
    b2 = math.e**2 * float(s) ** (2.0 + math.log(d) / math.log(2.0))
    try:
        b3 = s * (math.log(s) + d * math.log(2.0)) ** (d - 1) / math.factorial(d - 1)
    except OverflowError:
        b3 = math.inf
    return (b1, b2, b3)


def save_index_set(S: MultiIndexSet, path) -> None:
    """Write the set as text: header ``d=<d> n=<N>`` then one index per line."""
    with open(path, "w") as fh:
        fh.write(f"d={S.dim} n={len(S)}\n")
        for row in S.indices:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_index_set(path) -> MultiIndexSet:
    with open(path) as fh:
        header = fh.readline().split()
        d = int(header[0].split("=")[1])
        n = int(header[1].split("=")[1])
        rows = [[int(v) for v in fh.readline().split()] for _ in range(n)]
    arr = np.array(rows, dtype=np.int64).reshape(n, d)
    return MultiIndexSet(d, arr, {"kind": "loaded"})
