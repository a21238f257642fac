"""Closed-form bounds and diagnostics for the sparse-recovery guarantees.

Includes the sample-complexity log factor, the architecture/size bound
calculator, the sparsity <-> threshold relation for anisotropic sets, the
best s-term decay bound, empirical restricted-isometry diagnostics and the
constants linking the restricted isometry property to the robust null space
property. Universal constants that the guarantees leave unspecified default
to 1 and are configurable; reported bounds hold up to those constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .polybasis import MeasurementMatrix

SQRT2 = math.sqrt(2.0)

EXACT_RIP_MAX_N = 16
EXACT_RIP_MAX_S = 4


@dataclass(frozen=True)
class AnisotropyProfile:
    """Per-dimension smoothness radii rho_j > 1 and a slack parameter epsilon."""

    rho: tuple
    epsilon: float

    def __post_init__(self):
        rho = tuple(float(r) for r in np.atleast_1d(np.asarray(self.rho, dtype=float)))
        if any(r <= 1.0 for r in rho):
            raise ValueError("all rho_j must exceed 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return len(self.rho)

    @property
    def gamma(self) -> float:
        """Decay rate (1/(d+1)) * (d! prod_j log(rho_j) / (1+eps))^(1/d)."""
        d = self.dim
        prod_logs = float(np.prod([math.log(r) for r in self.rho]))
        return (math.factorial(d) * prod_logs / (1.0 + self.epsilon)) ** (1.0 / d) / (d + 1)


def bernstein_radius(c: float) -> float:
    """Largest ellipse parameter for a pole at c > 1: rho = c + sqrt(c^2 - 1)."""
    if c <= 1.0:
        raise ValueError("pole location must exceed 1")
    return c + math.sqrt(c * c - 1.0)


def log_factor(m: int, d: int, eps: float, c0: float = 1.0) -> float:
    """Sample-complexity log factor
    c0 * log(2m) * (log(2m) * min(log(2m)+d, log(2m)*log(2d)) + log(1/eps)).
    """
    if m < 1 or d < 1:
        raise ValueError("require m >= 1 and d >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    l2m = math.log(2.0 * m)
    inner = l2m * min(l2m + d, l2m * math.log(2.0 * d)) + math.log(1.0 / eps)
    return c0 * l2m * inner


@dataclass(frozen=True)
class TheoremBounds:
    """Outputs of the architecture/error bound calculator (up to universal constants)."""

    m: int
    d: int
    eps: float
    gamma: float
    K: int
    log_factor: float
    m_tilde: float
    s: int
    delta: float
    depth_bound: float
    size_bound: float
    param_bound: float
    e1: float

    def as_dict(self) -> dict:
        return {
            "inputs": {"m": self.m, "d": self.d, "eps": self.eps, "gamma": self.gamma, "K": self.K},
            "log_factor": self.log_factor,
            "m_tilde": self.m_tilde,
            "s": self.s,
            "delta": self.delta,
            "depth_bound": self.depth_bound,
            "size_bound": self.size_bound,
            "param_bound": self.param_bound,
            "approximation_error_e1": self.e1,
            "note": "bounds hold up to the configured universal constants",
        }


def theorem_bounds(
    m: int,
    d: int,
    eps: float,
    gamma: float,
    K: int,
    c0: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
) -> TheoremBounds:
    """Evaluate the architecture and error-bound formulas.

    Computes the log factor L, the effective sample count m~ = m/L, the
    sparsity s = ceil(sqrt(m~/2^d)), the three-way cardinality bound Delta
    (with 0! = 1 for d = 1), the depth/size/parameter bounds, and the
    approximation error term exp(-gamma m~^(1/(2d)) / sqrt(2)).
    """
    L = log_factor(m, d, eps, c0)
    mt = m / L
    s = max(1, math.ceil(math.sqrt(mt / 2.0**d)))
    ratio = mt / 2.0**d

    delta1 = 2.0 * mt**1.5 * 2.0 ** (d / 2.0)
    delta2 = math.e**2 * ratio ** (1.0 + math.log(d) / (2.0 * math.log(2.0)))
    delta3 = (
        math.sqrt(mt)
        * (math.log(mt) + (d + 1) * math.log(2.0)) ** (d - 1)
        / (2.0 ** (d / 2.0 - 1.0) * math.factorial(d - 1))
    )
    delta = min(delta1, delta2, delta3)

    root = math.sqrt(max(ratio, 0.0))
    gterm = gamma * mt ** (1.0 / (2.0 * d))
    depth = c1 * (1.0 + d * math.log(d)) * (1.0 + math.log(mt)) * (root + math.log(delta) + gterm)
    size = (
        c2
        * d
        * (d * ratio + (root + d * delta) * (math.log(mt) + math.log(delta) + gterm))
        + K * delta
    )
    e1 = math.exp(-gamma * mt ** (1.0 / (2.0 * d)) / SQRT2)
    return TheoremBounds(
        m=m,
        d=d,
        eps=eps,
        gamma=gamma,
        K=K,
        log_factor=L,
        m_tilde=mt,
        s=s,
        delta=delta,
        depth_bound=depth,
        size_bound=size,
        param_bound=K * delta,
        e1=e1,
    )


def tau_for_sparsity(rho, s: int) -> float:
    """Solve s = prod_j (log(1/tau)/log(rho_j) + 1) for tau in (0, 1).

    The right-hand side is strictly increasing in t = log(1/tau), so the root
    is found by bisection to relative accuracy 1e-12.
    """
    if s < 2:
        raise ValueError("s must be >= 2")
    log_rho = np.log(np.atleast_1d(np.asarray(rho, dtype=float)))
    if np.any(log_rho <= 0):
        raise ValueError("all rho_j must exceed 1")

    def count(t: float) -> float:
        return float(np.prod(t / log_rho + 1.0))

    lo, hi = 0.0, 1.0
    while count(hi) < s:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if count(mid) < s:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    t = 0.5 * (lo + hi)
    return math.exp(-t)


def best_s_term_bound(profile: AnisotropyProfile, s: int) -> float:
    """Best s-term decay bound exp(-gamma s^(1/d)) for the profile's rate gamma."""
    if s < 1:
        raise ValueError("s must be >= 1")
    d = profile.dim
    prod_logs = float(np.prod([math.log(r) for r in profile.rho]))
    expo = (s * math.factorial(d) * prod_logs / (1.0 + profile.epsilon)) ** (1.0 / d) / (d + 1)
    return math.exp(-expo)


def empirical_rip(A, s: int, mode: str = "auto", n_samples: int = 10_000, seed: int = 0) -> float:
    """Restricted isometry constant delta_s of A, exact or sampled.

    Exact mode scans every support of size s (allowed for N <= 16, s <= 4)
    and returns max over supports of max(lmax - 1, 1 - lmin) of the support
    Gram block. Randomized mode samples supports and returns a lower bound.
    """
    mat = A.matrix if isinstance(A, MeasurementMatrix) else np.asarray(A, dtype=float)
    N = mat.shape[1]
    if not 1 <= s <= N:
        raise ValueError("s must lie in [1, N]")
    if mode == "auto":
        mode = "exact" if (N <= EXACT_RIP_MAX_N and s <= EXACT_RIP_MAX_S) else "randomized"
    if mode == "exact":
        if N > EXACT_RIP_MAX_N or s > EXACT_RIP_MAX_S:
            raise ValueError(
                f"exact mode limited to N <= {EXACT_RIP_MAX_N}, s <= {EXACT_RIP_MAX_S}"
            )
        supports = combinations(range(N), s)
    else:
        rng = np.random.default_rng(seed)
        supports = (
            tuple(rng.choice(N, size=s, replace=False)) for _ in range(n_samples)
        )
    G = mat.T @ mat
    delta = 0.0
    for sup in supports:
        idx = np.asarray(sup)
        evals = np.linalg.eigvalsh(G[np.ix_(idx, idx)])
        delta = max(delta, abs(evals[-1] - 1.0), abs(1.0 - evals[0]))
    return delta


def rip_to_rnsp_constants(delta_2s: float) -> tuple[float, float]:
    """Null-space-property constants (rho, tau) implied by delta_2s < sqrt(2)-1.

    rho = sqrt(2) delta / (1 - delta), tau = sqrt(1 + delta) / (1 - delta).
    """
    if not 0 <= delta_2s < SQRT2 - 1.0:
        raise ValueError("delta_2s must lie in [0, sqrt(2)-1)")
    rho = SQRT2 * delta_2s / (1.0 - delta_2s)
    tau = math.sqrt(1.0 + delta_2s) / (1.0 - delta_2s)
    return rho, tau


def rnsp_perturbation(rho: float, tau: float, s: int, delta: float) -> tuple[float, float]:
    """Null-space-property constants after an operator-norm perturbation delta.

    Requires 0 <= delta < (1 - rho)/(tau (sqrt(s) + 1)); returns
    rho' = (rho + tau delta sqrt(s))/(1 - tau delta), tau' = tau/(1 - tau delta).
    """
    if not (0 <= rho < 1):
        raise ValueError("rho must lie in [0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if s < 1:
        raise ValueError("s must be >= 1")
    limit = (1.0 - rho) / (tau * (math.sqrt(s) + 1.0))
    if not 0 <= delta < limit:
        raise ValueError(f"delta must lie in [0, {limit}) for these constants")
    denom = 1.0 - tau * delta
    return (rho + tau * delta * math.sqrt(s)) / denom, tau / denom


def delta_rule(N: int, s: int, gamma: float, d: int) -> float:
    """Perturbation budget N^(-1/2) min{(9-4 sqrt 2)/(2 sqrt 5 (3+4 sqrt s)), exp(-gamma s^(1/d))}."""
    if N < 1 or s < 1:
        raise ValueError("require N >= 1 and s >= 1")
    rational = (9.0 - 4.0 * SQRT2) / (2.0 * math.sqrt(5.0) * (3.0 + 4.0 * math.sqrt(s)))
    exponential = math.exp(-gamma * s ** (1.0 / d))
    return min(rational, exponential) / math.sqrt(N)
