"""Field reconstruction, weighted norms and discrete space-time errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import (INTERIOR_RULE, Coefficients, DofMap, _MASS_PATTERN, element_gradients,
                       quadrature_points)
from .mesh import TriMesh
from .stepper import Trajectory

__all__ = [
    "ExactSolution",
    "LevelResult",
    "ErrorReport",
    "reconstruct_H",
    "reconstruct_E",
    "sigma_norm_sq",
    "mu_field_norm_sq",
    "error_H_relative",
    "error_E_relative",
    "error_max_sigma",
    "fit_slope",
]


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form u(x, y, t) with its time derivative and spatial gradient.

    All callables take numpy arrays; ``grad_u`` returns ``(du/dx, du/dy)``.
    """

    u: Callable
    du_dt: Callable
    grad_u: Callable
    description: str = ""


def _full(u, dofmap: DofMap | None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u if dofmap is None else dofmap.expand(u)


def reconstruct_H(mesh: TriMesh, dofmap: DofMap | None, u_nodal, coeffs: Coefficients) -> np.ndarray:
    """Per-triangle magnetic field (1/mu) (du/dy, -du/dx) of the P1 function u_h."""
    u = _full(u_nodal, dofmap)
    grad = np.einsum("eik,ei->ek", element_gradients(mesh), u[mesh.triangles])
    inv_mu = 1.0 / coeffs.mu_per_triangle(mesh)
    return inv_mu[:, None] * np.column_stack([grad[:, 1], -grad[:, 0]])


def reconstruct_E(u_n, u_prev, dt: float) -> np.ndarray:
    """Nodal out-of-plane electric field -(u_n - u_prev)/dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return -(np.asarray(u_n, dtype=float) - np.asarray(u_prev, dtype=float)) / dt


def sigma_norm_sq(mesh: TriMesh, coeffs: Coefficients, w) -> float:
    """Integral of sigma |w|^2 over the conductor for a full nodal P1 field w (exact)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.n_nodes,):
        raise ValueError(f"expected a full nodal field of length {mesh.n_nodes}")
    cond = mesh.conductor_mask
    wl = w[mesh.triangles[cond]]
    weight = coeffs.sigma_per_triangle(mesh)[cond] * mesh.areas[cond] / 12.0
    return float(np.sum(weight * np.einsum("ei,ij,ej->e", wl, _MASS_PATTERN, wl)))


def mu_field_norm_sq(mesh: TriMesh, coeffs: Coefficients, v) -> float:
    """Integral of (1/mu) |v|^2 for a per-triangle constant vector field."""
    v = np.asarray(v, dtype=float)
    return float(np.sum(mesh.areas / coeffs.mu_per_triangle(mesh) * np.sum(v * v, axis=1)))


def _percent(num: float, den: float, squared: bool) -> float:
    if den <= 0:
        raise ZeroDivisionError("exact solution has zero norm; relative error undefined")
    ratio = num / den
    return float(100.0 * (ratio if squared else np.sqrt(ratio)))


def error_H_relative(traj: Trajectory, exact: ExactSolution, mesh: TriMesh, dofmap: DofMap,
                     coeffs: Coefficients, squared: bool = False) -> float:
    """Relative percentage error of H over the time levels 1..N.

    ``squared=True`` returns 100 * (sum of squared errors) / (sum of squared norms);
    the default takes the square root of that ratio first, i.e. a relative error
    in the discrete L2(0,T; L2) norm.
    """
    _, w = INTERIOR_RULE
    pts = quadrature_points(mesh, INTERIOR_RULE)
    weight = mesh.areas / coeffs.mu_per_triangle(mesh)
    inv_mu = 1.0 / coeffs.mu_per_triangle(mesh)[:, None]
    dt = traj.dt
    num = den = 0.0
    for t, u in zip(traj.times[1:], traj.states[1:]):
        gx, gy = exact.grad_u(pts[..., 0], pts[..., 1], t)
        hx, hy = inv_mu * np.asarray(gy, float), -inv_mu * np.asarray(gx, float)
        hh = reconstruct_H(mesh, dofmap, u, coeffs)
        err = (hx - hh[:, [0]]) ** 2 + (hy - hh[:, [1]]) ** 2
        num += dt * float(np.sum(weight * (err @ w)))
        den += dt * float(np.sum(weight * ((hx ** 2 + hy ** 2) @ w)))
    return _percent(num, den, squared)


def error_E_relative(traj: Trajectory, exact: ExactSolution, mesh: TriMesh, dofmap: DofMap,
                     coeffs: Coefficients, squared: bool = False) -> float:
    """Relative percentage error of E = -du/dt in the sigma-norm over time levels 1..N.

    The exact field is sampled at the nodes and compared with the backward
    difference quotient of the discrete solution.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    dt = traj.dt
    num = den = 0.0
    for k in range(1, len(traj.times)):
        e_exact = -np.broadcast_to(np.asarray(exact.du_dt(x, y, traj.times[k]), float), x.shape)
        e_h = reconstruct_E(_full(traj.states[k], dofmap), _full(traj.states[k - 1], dofmap), dt)
        num += dt * sigma_norm_sq(mesh, coeffs, e_exact - e_h)
        den += dt * sigma_norm_sq(mesh, coeffs, e_exact)
    return _percent(num, den, squared)


def error_max_sigma(traj: Trajectory, exact: ExactSolution, mesh: TriMesh, dofmap: DofMap,
                    coeffs: Coefficients) -> float:
    """max over n >= 1 of the squared sigma-norm of u(t_n) - u_h^n, nodal samples."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return max(
        sigma_norm_sq(mesh, coeffs, np.broadcast_to(np.asarray(exact.u(x, y, t), float), x.shape)
                      - _full(u, dofmap))
        for t, u in zip(traj.times[1:], traj.states[1:])
    )


def fit_slope(points) -> float:
    """Least-squares slope of log(error) against log(h)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (h, error) pairs")
    if np.any(pts <= 0) or not np.isfinite(pts).all():
        raise ValueError("h and error values must be positive and finite")
    logs = np.log(pts)
    if np.ptp(logs[:, 0]) == 0:
        raise ValueError("all h values coincide")
    return float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])


@dataclass
class LevelResult:
    level: int
    n: int
    h: float
    dt: float
    err_H_pct: float
    err_E_pct: float
    err_max_sigma: float
    err_H_pct_sq: float
    err_E_pct_sq: float


@dataclass
class ErrorReport:
    """Rows ordered by decreasing h; slopes of the square-rooted percentages."""

    rows: list = field(default_factory=list)
    slope_H: float | None = None
    slope_E: float | None = None

    @property
    def err_H_percent(self) -> float:
        return self.rows[-1].err_H_pct

    @property
    def err_E_percent(self) -> float:
        return self.rows[-1].err_E_pct

    @property
    def err_max_sigma(self) -> float:
        return self.rows[-1].err_max_sigma
