"""P1 finite element operators on a :class:`~degenfem.mesh.TriMesh`.

Homogeneous Dirichlet conditions are imposed by dropping boundary nodes
from the unknowns; everything here works on interior degrees of freedom
unless a function says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Region, TriMesh
from .sparsela import CsrMatrix, solve_spd

__all__ = [
    "DofMap",
    "Coefficients",
    "local_stiffness",
    "local_mass",
    "assemble_stiffness",
    "assemble_mass_conductor",
    "assemble_load",
    "interpolate",
    "h1_projection",
    "h1_seminorm_error_sq",
    "element_gradients",
    "EDGE_MIDPOINT_RULE",
    "INTERIOR_RULE",
    "LOAD_RULE",
]

# barycentric points and weights (fractions of the triangle area), both exact for quadratics
EDGE_MIDPOINT_RULE = (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
                      np.full(3, 1.0 / 3.0))
INTERIOR_RULE = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
                 np.full(3, 1.0 / 3.0))
# vertices, edge midpoints and centroid; exact for cubics, so source*phi is integrated
# exactly for quadratic sources
LOAD_RULE = (np.vstack([np.eye(3), EDGE_MIDPOINT_RULE[0], np.full((1, 3), 1.0 / 3.0)]),
             np.array([1 / 20] * 3 + [2 / 15] * 3 + [9 / 20]))

_MASS_PATTERN = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


@dataclass(frozen=True, eq=False)
class DofMap:
    """Numbering of interior nodes; ``interior_of_node[i] == -1`` marks a boundary node."""

    interior_of_node: np.ndarray
    n_dofs: int

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "DofMap":
        idx = np.full(mesh.n_nodes, -1, dtype=np.int64)
        interior = np.ones(mesh.n_nodes, dtype=bool)
        interior[mesh.boundary_nodes] = False
        idx[interior] = np.arange(int(interior.sum()))
        idx.setflags(write=False)
        return cls(idx, int(interior.sum()))

    @property
    def node_of_dof(self) -> np.ndarray:
        return np.flatnonzero(self.interior_of_node >= 0)

    def expand(self, u) -> np.ndarray:
        """Full nodal vector with zeros on the boundary."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_dofs,):
            raise ValueError(f"expected {self.n_dofs} dof values, got shape {u.shape}")
        full = np.zeros(len(self.interior_of_node))
        full[self.node_of_dof] = u
        return full

    def restrict(self, full) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.node_of_dof]


@dataclass(frozen=True)
class Coefficients:
    """Piecewise constant permeability ``mu`` and conductivity ``sigma``.

    ``mu`` and ``sigma`` map each :class:`Region` to its value; conductivity
    must vanish in the dielectric and be positive in the conductor.
    """

    mu: dict
    sigma: dict

    def __post_init__(self):
        for r in Region:
            if r not in self.mu or r not in self.sigma:
                raise ValueError(f"missing coefficient for region {r.name}")
            if not self.mu[r] > 0:
                raise ValueError(f"mu must be positive, got {self.mu[r]} in {r.name}")
        if self.sigma[Region.DIELECTRIC] != 0:
            raise ValueError("sigma must be exactly zero in the dielectric")
        if not self.sigma[Region.CONDUCTOR] > 0:
            raise ValueError("sigma must be positive in the conductor")

    @classmethod
    def uniform(cls, mu: float, sigma_c: float) -> "Coefficients":
        return cls({Region.CONDUCTOR: float(mu), Region.DIELECTRIC: float(mu)},
                   {Region.CONDUCTOR: float(sigma_c), Region.DIELECTRIC: 0.0})

    @property
    def mu_max(self) -> float:
        return max(self.mu.values())

    def mu_per_triangle(self, mesh: TriMesh) -> np.ndarray:
        return np.where(mesh.conductor_mask, self.mu[Region.CONDUCTOR], self.mu[Region.DIELECTRIC])

    def sigma_per_triangle(self, mesh: TriMesh) -> np.ndarray:
        return np.where(mesh.conductor_mask, self.sigma[Region.CONDUCTOR], 0.0)


def _gradients(p: np.ndarray):
    """Barycentric gradients and areas for stacked triangles ``p`` of shape (M, 3, 2)."""
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    if np.any(area <= 0):
        raise ValueError("degenerate or clockwise triangle")
    # grad phi_i = rot(opposite edge) / (2 area)
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    two_a = (2.0 * area)[:, None]
    return np.stack([gx / two_a, gy / two_a], axis=2), area


def element_gradients(mesh: TriMesh) -> np.ndarray:
    """(M, 3, 2) gradients of the three hat functions on every triangle."""
    return _gradients(mesh.nodes[mesh.triangles])[0]


def _stiffness_batch(p, inv_mu):
    g, area = _gradients(p)
    k = np.einsum("eik,ejk->eij", g, g)
    k = 0.5 * (k + k.transpose(0, 2, 1))  # bitwise symmetric regardless of einsum ordering
    return k * (area * inv_mu)[:, None, None]


def _mass_batch(p, sigma):
    _, area = _gradients(p)
    return (sigma * area / 12.0)[:, None, None] * _MASS_PATTERN


def local_stiffness(coords, mu_value: float) -> np.ndarray:
    """Element matrix of (1/mu) grad u . grad v on one triangle."""
    if not mu_value > 0:
        raise ValueError("mu_value must be positive")
    p = np.asarray(coords, dtype=float).reshape(1, 3, 2)
    return _stiffness_batch(p, np.array([1.0 / mu_value]))[0]


def local_mass(coords, sigma_value: float) -> np.ndarray:
    """Element matrix of sigma u v on one triangle (exact for P1)."""
    if sigma_value < 0:
        raise ValueError("sigma_value must be nonnegative")
    p = np.asarray(coords, dtype=float).reshape(1, 3, 2)
    return _mass_batch(p, np.array([float(sigma_value)]))[0]


def _scatter(n_nodes: int, tris: np.ndarray, local: np.ndarray, dofmap: DofMap | None) -> CsrMatrix:
    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))
    vals = local.reshape(len(tris), 9)
    if dofmap is None:
        return CsrMatrix.from_triplets(n_nodes, rows, cols, vals)
    rows = dofmap.interior_of_node[rows]
    cols = dofmap.interior_of_node[cols]
    keep = (rows >= 0) & (cols >= 0)
    return CsrMatrix.from_triplets(dofmap.n_dofs, rows[keep], cols[keep], vals[keep])


def assemble_stiffness(mesh: TriMesh, coeffs: Coefficients | None, dofmap: DofMap | None) -> CsrMatrix:
    """Global (1/mu)-weighted stiffness matrix.

    ``coeffs=None`` gives the plain Laplacian (mu = 1), i.e. the Gram matrix of
    the H^1_0 seminorm. ``dofmap=None`` keeps boundary nodes.
    """
    inv_mu = np.ones(mesh.n_triangles) if coeffs is None else 1.0 / coeffs.mu_per_triangle(mesh)
    local = _stiffness_batch(mesh.nodes[mesh.triangles], inv_mu)
    return _scatter(mesh.n_nodes, mesh.triangles, local, dofmap)


def assemble_mass_conductor(mesh: TriMesh, coeffs: Coefficients, dofmap: DofMap | None) -> CsrMatrix:
    """Sigma-weighted mass matrix; only conductor triangles contribute.

    Rows of degrees of freedom whose support misses the conductor are empty.
    """
    cond = mesh.conductor_mask
    tris = mesh.triangles[cond]
    local = _mass_batch(mesh.nodes[tris], coeffs.sigma_per_triangle(mesh)[cond])
    return _scatter(mesh.n_nodes, tris, local, dofmap)


def quadrature_points(mesh: TriMesh, rule=EDGE_MIDPOINT_RULE) -> np.ndarray:
    """(M, Q, 2) physical coordinates of the quadrature points of ``rule``."""
    bary, _ = rule
    return np.einsum("qi,eik->eqk", bary, mesh.nodes[mesh.triangles])


def _eval_source(source, pts, t, mesh):
    region = np.broadcast_to(mesh.tri_region[:, None], pts.shape[:2])
    vals = np.asarray(source(pts[..., 0], pts[..., 1], t, region), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:2])
    if not np.isfinite(vals).all():
        raise ValueError(f"source is not finite at t={t}")
    return vals


def assemble_load(mesh: TriMesh, dofmap: DofMap | None, source, t: float) -> np.ndarray:
    """Load vector b_p = integral of source(., t) * phi_p (7-point rule, exact for quadratic sources).

    ``source(x, y, t, region)`` is evaluated on arrays; ``region`` holds the
    tag of the triangle owning each quadrature point, so sources may jump
    across the conductor interface.
    """
    bary, w = LOAD_RULE
    vals = _eval_source(source, quadrature_points(mesh, LOAD_RULE), t, mesh)
    local = mesh.areas[:, None] * ((vals * w) @ bary)
    full = np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)
    return full if dofmap is None else dofmap.restrict(full)


def interpolate(mesh: TriMesh, dofmap: DofMap | None, g) -> np.ndarray:
    """Nodal (Lagrange) interpolant of ``g(x, y)``; boundary values are dropped."""
    vals = np.broadcast_to(np.asarray(g(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float),
                           (mesh.n_nodes,))
    return np.array(vals) if dofmap is None else dofmap.restrict(vals)


def gradient_load(mesh: TriMesh, dofmap: DofMap, grad_g) -> np.ndarray:
    """b_p = integral of grad g . grad phi_p using the interior 3-point rule."""
    bary, w = INTERIOR_RULE
    pts = quadrature_points(mesh, INTERIOR_RULE)
    gx, gy = grad_g(pts[..., 0], pts[..., 1])
    avg = np.stack([np.asarray(gx, float) @ w, np.asarray(gy, float) @ w], axis=1)  # (M, 2)
    local = mesh.areas[:, None] * np.einsum("eik,ek->ei", element_gradients(mesh), avg)
    full = np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)
    return dofmap.restrict(full)


def h1_projection(mesh: TriMesh, dofmap: DofMap, stiffness_unit: CsrMatrix, grad_g,
                  rtol: float = 1e-12) -> np.ndarray:
    """Coefficients of the (grad, grad)-orthogonal projection of g onto X_h.

    Only the gradient ``grad_g(x, y) -> (gx, gy)`` of g enters.
    """
    return solve_spd(stiffness_unit, gradient_load(mesh, dofmap, grad_g), rtol=rtol)


def h1_seminorm_error_sq(mesh: TriMesh, dofmap: DofMap, stiffness_unit: CsrMatrix, grad_g, v) -> float:
    """||grad(g - v_h)||^2, using the same quadrature as :func:`h1_projection`.

    With a shared rule the projection is the exact minimiser of this quantity.
    """
    _, w = INTERIOR_RULE
    pts = quadrature_points(mesh, INTERIOR_RULE)
    gx, gy = grad_g(pts[..., 0], pts[..., 1])
    g_sq = float(np.sum(mesh.areas * ((np.asarray(gx) ** 2 + np.asarray(gy) ** 2) @ w)))
    v = np.asarray(v, dtype=float)
    return g_sq - 2.0 * float(gradient_load(mesh, dofmap, grad_g) @ v) + stiffness_unit.quad(v)
