"""Parametric diffusion data generator on the unit square.

Solves -div(a(x, y) grad u) = g(x) on (0,1)^2 with homogeneous Dirichlet
conditions by P1 finite elements on a structured triangulation, for two
coefficient families: an affine coefficient 3 + x1*y1 + x2*y2 in d = 2
parameters, and a log-transformed layered expansion in d parameters.

Nodal vectors carry all n^2 mesh nodes with boundary entries pinned to zero;
the conforming subspace of H^1_0 is spanned by the interior hat functions,
and :func:`solution_space` builds the corresponding Gram space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .hilbert import DiscreteHilbertSpace


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform triangulation of [0,1]^2: each cell split along the (0,0)-(1,1) diagonal."""

    n: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def meshsize(self) -> float:
        return math.sqrt(2.0) / (self.n - 1)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)


def build_mesh(n: int) -> StructuredMesh:
    """Structured mesh with n nodes per side: n^2 vertices, 2(n-1)^2 triangles."""
    if n < 2:
        raise ValueError("need at least 2 nodes per side")
    xs = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * n + j

    tris = []
    for i in range(n - 1):
        for j in range(n - 1):
            p00, p10 = vid(i, j), vid(i + 1, j)
            p01, p11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((p00, p10, p11))  # both positively oriented
            tris.append((p00, p11, p01))
    boundary = (
        (nodes[:, 0] == 0.0)
        | (nodes[:, 0] == 1.0)
        | (nodes[:, 1] == 0.0)
        | (nodes[:, 1] == 1.0)
    )
    nodes.setflags(write=False)
    triangles = np.asarray(tris, dtype=np.int64)
    triangles.setflags(write=False)
    boundary.setflags(write=False)
    return StructuredMesh(n, nodes, triangles, boundary)


def _triangle_geometry(mesh: StructuredMesh):
    """Areas, constant P1 gradients and edge midpoints for every triangle."""
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    v1 = p[:, 1] - p[:, 0]
    v2 = p[:, 2] - p[:, 0]
    area = 0.5 * (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])
    if np.any(area <= 0):
        raise ValueError("mesh contains non-positively oriented triangles")
    # gradient of hat function at vertex k is perpendicular to the opposite edge
    grads = np.empty((len(area), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        grads[:, k, 0] = -e[:, 1]
        grads[:, k, 1] = e[:, 0]
    grads /= (2.0 * area)[:, None, None]
    midpoints = 0.5 * (p + np.roll(p, -1, axis=1))  # (T, 3, 2) edge midpoints
    return area, grads, midpoints


_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def gram_matrices(mesh: StructuredMesh):
    """Exact P1 mass and stiffness matrices over all nodes (CSR).

    The stiffness matrix annihilates constants before boundary conditions;
    both matrices are SPD once restricted to the interior nodes.
    """
    area, grads, _ = _triangle_geometry(mesh)
    T = mesh.n_triangles
    local_mass = area[:, None, None] * _LOCAL_MASS[None, :, :]
    local_stiff = np.einsum("tkd,tld->tkl", grads, grads) * area[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = mesh.n_nodes
    mass = scipy.sparse.coo_matrix(
        (local_mass.ravel(), (rows, cols)), shape=(K, K)
    ).tocsr()
    stiff = scipy.sparse.coo_matrix(
        (local_stiff.ravel(), (rows, cols)), shape=(K, K)
    ).tocsr()
    return mass, stiff


def solution_space(mesh: StructuredMesh, norm: str = "h1") -> DiscreteHilbertSpace:
    """Gram space of the interior hat functions ("l2" mass or "h1" stiffness)."""
    mass, stiff = gram_matrices(mesh)
    interior = mesh.interior
    if norm == "l2":
        G = mass[np.ix_(interior, interior)]
        label = "fem-l2"
    elif norm == "h1":
        G = stiff[np.ix_(interior, interior)]
        label = "fem-h1"
    else:
        raise ValueError("norm must be 'l2' or 'h1'")
    return DiscreteHilbertSpace(np.asarray(G.todense()), label=label)


def restrict_to_interior(mesh: StructuredMesh, values: np.ndarray) -> np.ndarray:
    """Drop boundary columns from (m, n_nodes) nodal rows (or a single row)."""
    values = np.asarray(values, dtype=float)
    return values[..., mesh.interior]


def extend_with_boundary(mesh: StructuredMesh, values: np.ndarray) -> np.ndarray:
    """Re-insert zero boundary entries into interior nodal rows."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    full = np.zeros(values.shape[:-1] + (mesh.n_nodes,))
    full[..., mesh.interior] = values
    return full


class AffineCoefficient:
    """a(x, y) = 3 + x1*y1 + x2*y2 in d = 2 parameters (uniformly >= 1)."""

    d = 2

    def __call__(self, x: np.ndarray, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != 2:
            raise ValueError("affine coefficient takes d = 2 parameters")
        vals = 3.0 + x[:, 0] * y[0] + x[:, 1] * y[1]
        if np.any(vals <= 0):
            raise ValueError("coefficient non-positive; ellipticity violated")
        return vals

    def descriptor(self) -> dict:
        return {"kind": "affine", "d": 2}


class LogKLCoefficient:
    """Layered log-expansion coefficient in d parameters.

    a(x, y) = exp(1 + y_1 (sqrt(pi) b / 2)^(1/2) + sum_{i=2}^d z_i q_i(x1) y_i)
    with z_i = (sqrt(pi) b)^(1/2) exp(-(floor(i/2) pi b)^2 / 8) and q_i a sine
    for even i, a cosine for odd i, with argument floor(i/2) pi x1 / b_p.
    Defaults: b_c = 1/8, b_p = max(1, 2 b_c), b = b_c / b_p.
    """

    def __init__(self, d: int, beta_c: float = 0.125):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = d
        self.beta_c = beta_c
        self.beta_p = max(1.0, 2.0 * beta_c)
        self.beta = beta_c / self.beta_p
        i = np.arange(2, d + 1)
        half = np.floor(i / 2.0)
        self._zeta = np.sqrt(math.sqrt(math.pi) * self.beta) * np.exp(
            -((half * math.pi * self.beta) ** 2) / 8.0
        )
        self._freq = half * math.pi / self.beta_p
        self._is_even = i % 2 == 0

    def __call__(self, x: np.ndarray, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.d:
            raise ValueError(f"expected {self.d} parameters, got {y.shape[0]}")
        expo = np.full(x.shape[0], 1.0 + y[0] * math.sqrt(math.sqrt(math.pi) * self.beta / 2.0))
        if self.d > 1:
            arg = np.outer(x[:, 0], self._freq)
            modes = np.where(self._is_even[None, :], np.sin(arg), np.cos(arg))
            expo += modes @ (self._zeta * y[1:])
        return np.exp(expo)

    def descriptor(self) -> dict:
        return {"kind": "logkl", "d": self.d, "beta_c": self.beta_c}


def make_coefficient(descriptor: dict):
    kind = descriptor.get("kind")
    if kind == "affine":
        return AffineCoefficient()
    if kind == "logkl":
        return LogKLCoefficient(descriptor["d"], descriptor.get("beta_c", 0.125))
    raise ValueError(f"unknown coefficient descriptor {descriptor!r}")


def coeff_eval(c, x, y) -> np.ndarray:
    """Pointwise coefficient values a(x, y) > 0 for points x and one parameter y."""
    vals = c(x, y)
    if np.any(vals <= 0):
        raise ValueError("coefficient non-positive; ellipticity violated")
    return vals


@dataclass(frozen=True)
class FEMSolution:
    """Nodal values over all mesh nodes; boundary entries are exactly zero."""

    mesh: StructuredMesh
    nodal: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.nodal, dtype=float).reshape(-1)
        if v.shape[0] != self.mesh.n_nodes:
            raise ValueError("nodal vector length does not match mesh")
        object.__setattr__(self, "nodal", v)


class DiffusionSolver:
    """Assembles and solves the parametric diffusion problem for many y.

    Element integrals of a * grad(phi_j) . grad(phi_k) use the 3-point
    edge-midpoint rule (exact for quadratics); the load uses the same rule.
    The reduced interior system is solved with a sparse direct factorization.
    """

    def __init__(self, coefficient, forcing, mesh: StructuredMesh):
        self.coefficient = coefficient
        self.forcing = forcing
        self.mesh = mesh
        area, grads, midpoints = _triangle_geometry(mesh)
        self._area = area
        self._gg = np.einsum("tkd,tld->tkl", grads, grads)
        self._midpoints = midpoints
        self._rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
        self._cols = np.tile(mesh.triangles, (1, 3)).ravel()
        self._interior = mesh.interior
        self._load = self._assemble_load()

    def _forcing_values(self, pts: np.ndarray) -> np.ndarray:
        if callable(self.forcing):
            return np.asarray(self.forcing(pts), dtype=float)
        return np.full(pts.shape[0], float(self.forcing))

    def _assemble_load(self) -> np.ndarray:
        mesh = self.mesh
        load = np.zeros(mesh.n_nodes)
        g_mid = self._forcing_values(self._midpoints.reshape(-1, 2)).reshape(-1, 3)
        # edge-midpoint rule: int_T g phi_k = (area/3) * sum over the two
        # midpoints adjacent to vertex k, each with phi_k = 1/2
        for k in range(3):
            contrib = (self._area / 3.0) * 0.5 * (g_mid[:, k] + g_mid[:, (k + 2) % 3])
            np.add.at(load, mesh.triangles[:, k], contrib)
        return load

    def system_matrix(self, y) -> scipy.sparse.csc_matrix:
        a_mid = coeff_eval(self.coefficient, self._midpoints.reshape(-1, 2), y)
        a_elem = a_mid.reshape(-1, 3).mean(axis=1)
        local = (a_elem * self._area)[:, None, None] * self._gg
        K = self.mesh.n_nodes
        return scipy.sparse.coo_matrix(
            (local.ravel(), (self._rows, self._cols)), shape=(K, K)
        ).tocsc()

    def solve(self, y) -> FEMSolution:
        interior = self._interior
        A = self.system_matrix(y)[np.ix_(interior, interior)].tocsc()
        try:
            lu = scipy.sparse.linalg.splu(A)
            u_int = lu.solve(self._load[interior])
        except RuntimeError as exc:
            raise RuntimeError(f"linear solve failed at y = {np.asarray(y)}") from exc
        if not np.all(np.isfinite(u_int)):
            raise RuntimeError(f"non-finite solution at y = {np.asarray(y)}")
        full = np.zeros(self.mesh.n_nodes)
        full[interior] = u_int
        return FEMSolution(self.mesh, full)


def solve_pde(coefficient, forcing, mesh: StructuredMesh, y) -> FEMSolution:
    """One-shot Galerkin P1 solve of the diffusion problem at parameter y."""
    return DiffusionSolver(coefficient, forcing, mesh).solve(y)


def sample_points(d: int, m: int, seed: int) -> np.ndarray:
    """m i.i.d. uniform points on [-1,1]^d from a seeded generator."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(m, d))


@dataclass(frozen=True)
class Dataset:
    """Sampled parameter points with nodal solution rows and provenance."""

    points: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if pts.shape[0] != vals.shape[0]:
            raise ValueError("points/values length mismatch")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.points.shape[0]


def generate_dataset(coefficient, forcing, mesh: StructuredMesh, m: int, seed: int) -> Dataset:
    """Solve the PDE at m seeded uniform parameter points.

    The same seed always yields a bitwise-identical dataset. Values are full
    nodal vectors (boundary zeros included).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    d = getattr(coefficient, "d")
    points = sample_points(d, m, seed)
    solver = DiffusionSolver(coefficient, forcing, mesh)
    values = np.empty((m, mesh.n_nodes))
    for i in range(m):
        values[i] = solver.solve(points[i]).nodal
    forcing_desc = (
        {"kind": "constant", "value": float(forcing)}
        if not callable(forcing)
        else {"kind": "callable", "name": getattr(forcing, "__name__", "anonymous")}
    )
    meta = {
        "d": d,
        "m": m,
        "K": mesh.n_nodes,
        "seed": seed,
        "mesh_n": mesh.n,
        "coefficient": coefficient.descriptor(),
        "forcing": forcing_desc,
    }
    return Dataset(points, values, meta)


# 7-point degree-5 rule on the reference triangle (barycentric, weights sum 1).
_TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [0.059715871789770, 0.470142064105115, 0.470142064105115],
        [0.470142064105115, 0.059715871789770, 0.470142064105115],
        [0.470142064105115, 0.470142064105115, 0.059715871789770],
        [0.797426985353087, 0.101286507323456, 0.101286507323456],
        [0.101286507323456, 0.797426985353087, 0.101286507323456],
        [0.101286507323456, 0.101286507323456, 0.797426985353087],
    ]
)
_TRI7_W = np.array(
    [
        0.225,
        0.132394152788506,
        0.132394152788506,
        0.132394152788506,
        0.125939180544827,
        0.125939180544827,
        0.125939180544827,
    ]
)


def integrate_squared_error(mesh: StructuredMesh, nodal: np.ndarray, exact=None) -> float:
    """Integral of (u_h - exact)^2 over the domain with a degree-5 triangle rule.

    With ``exact=None`` integrates u_h^2 (an independent check of the mass
    matrix). ``exact`` is a callable of an (n, 2) point array.
    """
    nodal = np.asarray(nodal, dtype=float).reshape(-1)
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    area, _, _ = _triangle_geometry(mesh)
    vals_at_vertices = nodal[mesh.triangles]  # (T, 3)
    total = 0.0
    for bary, w in zip(_TRI7_BARY, _TRI7_W):
        pts = np.einsum("k,tkd->td", bary, p)
        uh = vals_at_vertices @ bary
        diff = uh - (exact(pts) if exact is not None else 0.0)
        total += w * float(np.dot(area, diff**2))
    return total
