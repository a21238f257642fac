"""Block-sparse recovery of Hilbert-valued coefficient vectors.

Solves two convex programs over Z in R^(N x K) (rows = coordinates of the
entries of a Hilbert-valued vector):

* square-root form:  min  lam * ||z||_{V,1} + ||A z - b||_{V,2}
* squared form:      min  lam * ||z||_{V,1} + ||A z - b||_{V,2}^2

After the change of variables W = Z R' (R the Gram factor) both reduce to a
group-sparse problem with Euclidean row norms; the square-root form is solved
with a primal-dual (Chambolle-Pock) iteration and the squared form with
proximal gradient (ISTA) plus optional continuation and Bregman updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import DiscreteHilbertSpace, HilbertVector
from .multiindex import MultiIndexSet
from .polybasis import MeasurementMatrix, assemble_measurement_matrix

# Constants of the function-independent regularization rule, obtained from
# the null-space-property constants rho' = 3/4 and tau' <= 3 sqrt(5)/2.
RHO_PRIME = 0.75
TAU_PRIME_BOUND = 3.0 * math.sqrt(5.0) / 2.0


def _c1_constant(rho: float) -> float:
    return (3.0 * rho + 1.0) * (rho + 1.0) / (2.0 * (1.0 - rho))


def _c2_constant(rho: float, tau: float) -> float:
    return (3.0 * rho + 5.0) * tau / (2.0 * (1.0 - rho))


def tau_prime(s: int) -> float:
    """Sparsity-dependent perturbed NSP constant sqrt(5)(3+4 sqrt s)/(2(sqrt 2+3 sqrt s))."""
    rs = math.sqrt(s)
    return math.sqrt(5.0) * (3.0 + 4.0 * rs) / (2.0 * (math.sqrt(2.0) + 3.0 * rs))


def lambda_rule(s: int, tau: float = TAU_PRIME_BOUND) -> float:
    """Function-independent regularization weight C1'/(C2' sqrt(s)).

    Depends only on the target sparsity s (never on the data or the noise).
    By default uses the upper bound 3 sqrt(5)/2 for the NSP constant tau';
    pass ``tau=tau_prime(s)`` for the sparsity-dependent value.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    c1 = _c1_constant(RHO_PRIME)
    c2 = _c2_constant(RHO_PRIME, tau)
    return c1 / (c2 * math.sqrt(s))


def block_soft_threshold(v, threshold: float, space: DiscreteHilbertSpace | None = None):
    """Proximal map of the (V-)norm: v * max(0, 1 - threshold/||v||).

    With ``space`` given the norm is the Gram-weighted V-norm, otherwise the
    Euclidean norm. Vectors with ||v|| <= threshold map to zero.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    nrm = float(space.norms(v[None, :])[0]) if space is not None else float(np.linalg.norm(v))
    if nrm <= threshold:
        return np.zeros_like(v)
    return v * (1.0 - threshold / nrm)


def _row_soft_threshold(W: np.ndarray, threshold: float) -> np.ndarray:
    """Row-wise block soft threshold with Euclidean row norms."""
    norms = np.linalg.norm(W, axis=1)
    scale = np.zeros_like(norms)
    mask = norms > threshold
    scale[mask] = 1.0 - threshold / norms[mask]
    return W * scale[:, None]


def operator_norm(A: np.ndarray, iters: int = 100, seed: int = 0, safety: float = 1.01) -> float:
    """Largest singular value of A by seeded power iteration, times a safety factor."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        sigma = np.linalg.norm(w)
        if sigma == 0.0:
            return 0.0
        v = w / sigma
    return safety * math.sqrt(sigma)


@dataclass
class SolverConfig:
    """Iteration limits and stopping tolerances shared by both solvers.

    The primal-dual scheme uses step sizes sigma = tau = step_fraction/||A||,
    which satisfies the convergence condition sigma*tau*||A||^2 <= 1. The
    squared-form solver uses gradient step step_fraction/(2 ||A||^2), the
    descent-lemma bound for the squared data term.
    """

    max_iters: int = 200_000
    rel_tol: float = 1e-10
    stall_window: int = 50
    abs_tol: float = 0.0
    step_fraction: float = 0.99
    power_iters: int = 100
    power_seed: int = 0
    # squared-form extras
    continuation_stages: int = 1
    continuation_factor: float = 4.0
    bregman_iters: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0 < self.step_fraction <= 1.0:
            raise ValueError("step_fraction must lie in (0, 1]")
        if self.continuation_stages < 1:
            raise ValueError("continuation_stages must be >= 1")


@dataclass
class RecoveryProblem:
    """Measurement matrix A, normalized data rows b (m x K), space and weight."""

    A: MeasurementMatrix | np.ndarray
    b: np.ndarray
    space: DiscreteHilbertSpace
    lam: float

    def __post_init__(self):
        mat = self.A.matrix if isinstance(self.A, MeasurementMatrix) else np.asarray(self.A, float)
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if b.shape[0] != mat.shape[0]:
            raise ValueError(
                f"row mismatch: A has {mat.shape[0]} rows, b has {b.shape[0]}"
            )
        if b.shape[1] != self.space.dim:
            raise ValueError("b columns must match space dimension")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        self.b = b

    @property
    def matrix(self) -> np.ndarray:
        return self.A.matrix if isinstance(self.A, MeasurementMatrix) else self.A


@dataclass
class RecoveryResult:
    solution: HilbertVector
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    residual: float
    extras: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def _check_finite(W: np.ndarray, what: str, iteration: int) -> None:
    if not np.all(np.isfinite(W)):
        raise FloatingPointError(
            f"non-finite {what} at iteration {iteration}; aborting solve"
        )


def _stalled(trace: list[float], window: int, rel_tol: float, abs_tol: float) -> bool:
    if len(trace) <= window:
        return False
    recent = trace[-window - 1 :]
    drop = max(recent) - min(recent)
    return drop <= abs_tol + rel_tol * max(1e-300, abs(recent[-1]))


def solve_srlasso(problem: RecoveryProblem, config: SolverConfig | None = None) -> RecoveryResult:
    """Minimize lam*||z||_{V,1} + ||Az - b||_{V,2} by a primal-dual iteration.

    Both terms are nonsmooth: the data term is handled through its dual
    (projection onto the Euclidean unit ball in factor coordinates) and the
    regularizer through the row-wise block soft threshold. The returned
    iterate is the one with the lowest recorded objective, so its objective
    never exceeds the value at z = 0.
    """
    config = config or SolverConfig()
    A = problem.matrix
    space = problem.space
    m, N = A.shape
    Bw = space.to_factor_coords(problem.b)
    lam = problem.lam

    opnorm = operator_norm(A, config.power_iters, config.power_seed)
    step = config.step_fraction / max(opnorm, 1e-300)
    sigma = tau = step

    W = np.zeros((N, space.dim))
    Wbar = W.copy()
    P = np.zeros_like(Bw)

    def objective(Wm: np.ndarray) -> float:
        return lam * float(np.linalg.norm(Wm, axis=1).sum()) + float(
            np.linalg.norm(A @ Wm - Bw)
        )

    trace = [objective(W)]
    best_obj = trace[0]
    best_W = W.copy()
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        P = P + sigma * (A @ Wbar - Bw)
        pnorm = np.linalg.norm(P)
        if pnorm > 1.0:
            P /= pnorm
        W_new = _row_soft_threshold(W - tau * (A.T @ P), tau * lam)
        _check_finite(W_new, "iterate", it)
        Wbar = 2.0 * W_new - W
        W = W_new
        obj = objective(W)
        trace.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_W = W.copy()
        if _stalled(trace, config.stall_window, config.rel_tol, config.abs_tol):
            converged = True
            break

    Z = space.from_factor_coords(best_W)
    residual = float(np.linalg.norm(A @ best_W - Bw))
    return RecoveryResult(
        solution=HilbertVector(space, Z),
        objective_trace=np.asarray(trace),
        iterations=it,
        converged=converged,
        residual=residual,
        extras={"operator_norm_estimate": opnorm, "best_objective": best_obj},
    )


def solve_lasso(problem: RecoveryProblem, config: SolverConfig | None = None) -> RecoveryResult:
    """Minimize lam*||z||_{V,1} + ||Az - b||_{V,2}^2 by proximal gradient.

    Optional continuation solves a geometric sequence of weights
    lam * factor^(stages-1), ..., lam * factor, lam (warm started), ending at
    the requested lam. Optional Bregman updates add the residual back to the
    data between outer passes. The gradient step is 1/(2 ||A||^2), the valid
    monotone-descent step for the squared data term.
    """
    config = config or SolverConfig()
    A = problem.matrix
    space = problem.space
    N = A.shape[1]
    B0 = space.to_factor_coords(problem.b)
    lam = problem.lam

    opnorm = operator_norm(A, config.power_iters, config.power_seed)
    step = config.step_fraction / (2.0 * max(opnorm, 1e-300) ** 2)

    def objective(Wm: np.ndarray, Bm: np.ndarray, lam_k: float) -> float:
        return lam_k * float(np.linalg.norm(Wm, axis=1).sum()) + float(
            np.linalg.norm(A @ Wm - Bm) ** 2
        )

    W = np.zeros((N, space.dim))
    trace: list[float] = [objective(W, B0, lam)]
    total_iters = 0
    converged = True
    Bk = B0.copy()
    for outer in range(config.bregman_iters + 1):
        for stage in range(config.continuation_stages):
            lam_k = lam * config.continuation_factor ** (
                config.continuation_stages - 1 - stage
            )
            stage_trace = [objective(W, Bk, lam_k)]
            stage_converged = False
            for it in range(1, config.max_iters + 1):
                grad = 2.0 * (A.T @ (A @ W - Bk))
                W = _row_soft_threshold(W - step * grad, step * lam_k)
                _check_finite(W, "iterate", it)
                total_iters += 1
                stage_trace.append(objective(W, Bk, lam_k))
                if _stalled(stage_trace, config.stall_window, config.rel_tol, config.abs_tol):
                    stage_converged = True
                    break
            converged = converged and stage_converged
            if stage == config.continuation_stages - 1 and outer == config.bregman_iters:
                trace.extend(stage_trace[1:])
        if outer < config.bregman_iters:
            Bk = Bk + (B0 - A @ W)

    residual = float(np.linalg.norm(A @ W - B0))
    Z = space.from_factor_coords(W)
    return RecoveryResult(
        solution=HilbertVector(space, Z),
        objective_trace=np.asarray(trace),
        iterations=total_iters,
        converged=converged,
        residual=residual,
        extras={"operator_norm_estimate": opnorm},
    )


def auto_sparsity(m: int, d: int) -> int:
    """Default sparsity target ceil(sqrt(m / 2^d)), clipped to at least 1."""
    return max(1, math.ceil(math.sqrt(m / 2.0**d)))


def recover_coefficients(
    samples,
    S: MultiIndexSet,
    lam="auto",
    space: DiscreteHilbertSpace | None = None,
    config: SolverConfig | None = None,
    solver: str = "srlasso",
    full_output: bool = False,
):
    """Recover polynomial coefficients from samples of a Hilbert-valued map.

    Assembles the normalized sample matrix for the index set S at the sample
    points, stacks the sample coordinates into b = values/sqrt(m) and solves
    the square-root (default) or squared recovery problem. ``lam="auto"``
    applies :func:`lambda_rule` with the sparsity target ceil(sqrt(m / 2^d)),
    which depends only on m and d.

    Parameters
    ----------
    samples : either a sequence of (point, HilbertElement) pairs, or a tuple
        (points, values) of arrays with shapes (m, d) and (m, K); in the
        latter case ``space`` is required.

    Returns the recovered HilbertVector, or the full RecoveryResult when
    ``full_output`` is set.
    """
    if isinstance(samples, tuple) and len(samples) == 2:
        points, values = samples
        if space is None:
            raise ValueError("space is required when passing raw arrays")
    else:
        pairs = list(samples)
        if not pairs:
            raise ValueError("empty sample list")
        points = np.array([np.asarray(p, dtype=float) for p, _ in pairs])
        values = np.array([el.coeffs for _, el in pairs])
        if space is None:
            space = pairs[0][1].space
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m = points.shape[0]
    if values.shape[0] != m:
        raise ValueError("points and values must have the same length")
    A = assemble_measurement_matrix(S, points)
    b = values / math.sqrt(m)
    if lam == "auto":
        lam = lambda_rule(auto_sparsity(m, S.dim))
    problem = RecoveryProblem(A, b, space, float(lam))
    if solver == "srlasso":
        result = solve_srlasso(problem, config)
    elif solver == "lasso":
        result = solve_lasso(problem, config)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return result if full_output else result.solution


def predict(S: MultiIndexSet, coefficients: np.ndarray, points) -> np.ndarray:
    """Evaluate sum_j psi_{nu_j}(y) c_j at new points; returns (n, K)."""
    from .polybasis import evaluate_basis

    basis = evaluate_basis(S, points)
    return basis @ np.asarray(coefficients, dtype=float)
