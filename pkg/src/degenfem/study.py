"""Manufactured eddy-current problem and convergence studies.

The exact solution is u = exp(-5 pi t) sin(pi x) sin(pi y) on the unit
square; the source current is whatever makes it solve
sigma du/dt - div((1/mu) grad u) = J_d.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (ErrorReport, ExactSolution, LevelResult, error_E_relative, error_H_relative,
                       error_max_sigma, fit_slope, reconstruct_E, reconstruct_H)
from .assembly import (Coefficients, DofMap, assemble_load, assemble_mass_conductor,
                       assemble_stiffness, interpolate)
from .mesh import Region, TriMesh, generate_unit_square, mesh_size, refine_uniform
from .stepper import DegenerateSystem, Trajectory, run

__all__ = [
    "MU0",
    "StudyConfig",
    "ConfigError",
    "manufactured_solution",
    "manufactured_source",
    "eddy_current_system",
    "run_level",
    "run_convergence",
    "write_convergence_csv",
    "cmd_solve",
]

logger = logging.getLogger(__name__)

MU0 = 4e-7 * math.pi
DECAY = 5.0 * math.pi
_SCALINGS = ("linear", "quadratic", "fixed")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    levels: int = 1
    n0: int = 4
    dt0: float = 0.025
    T: float = 1.0
    dt_scaling: str = "linear"
    mu: float = MU0
    sigma_c: float = 1e6
    conductor: tuple = (0.25, 0.25, 0.75, 0.75)
    output: str = "convergence.csv"

    def __post_init__(self):
        self.conductor = tuple(float(c) for c in self.conductor) if self.conductor is not None else None
        self.validate()

    def validate(self):
        if not isinstance(self.levels, int) or self.levels < 1:
            raise ConfigError(f"levels must be a positive integer, got {self.levels!r}")
        if not isinstance(self.n0, int) or self.n0 < 1:
            raise ConfigError(f"n0 must be a positive integer, got {self.n0!r}")
        for name in ("dt0", "T", "mu", "sigma_c"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.dt_scaling not in _SCALINGS:
            raise ConfigError(f"dt_scaling must be one of {_SCALINGS}, got {self.dt_scaling!r}")
        if self.conductor is not None:
            if len(self.conductor) != 4:
                raise ConfigError("conductor must be x0,y0,x1,y1")
            try:
                generate_unit_square(self.n0, self.conductor)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path, **overrides) -> "StudyConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def coefficients(self) -> Coefficients:
        return Coefficients.uniform(self.mu, self.sigma_c)

    def level_dt(self, k: int) -> float:
        factor = {"linear": 2.0 ** k, "quadratic": 4.0 ** k, "fixed": 1.0}[self.dt_scaling]
        return self.dt0 / factor

    def steps_for(self, dt: float) -> int:
        n_steps = round(self.T / dt)
        if n_steps < 1 or abs(n_steps * dt - self.T) > 1e-9 * self.T:
            raise ConfigError(f"T={self.T} is not an integer multiple of dt={dt}")
        return n_steps


def manufactured_solution() -> ExactSolution:
    pi = math.pi

    def u(x, y, t):
        return np.exp(-DECAY * t) * np.sin(pi * x) * np.sin(pi * y)

    def du_dt(x, y, t):
        return -DECAY * u(x, y, t)

    def grad_u(x, y, t):
        a = np.exp(-DECAY * t) * pi
        return a * np.cos(pi * x) * np.sin(pi * y), a * np.sin(pi * x) * np.cos(pi * y)

    return ExactSolution(u, du_dt, grad_u, "exp(-5 pi t) sin(pi x) sin(pi y)")


def manufactured_source(coeffs: Coefficients):
    """J_d(x, y, t, region) = sigma du/dt - (1/mu) laplace(u), piecewise in region."""
    exact = manufactured_solution()
    sig = np.array([coeffs.sigma[Region.DIELECTRIC], coeffs.sigma[Region.CONDUCTOR]])
    inv_mu = np.array([1.0 / coeffs.mu[Region.DIELECTRIC], 1.0 / coeffs.mu[Region.CONDUCTOR]])

    def source(x, y, t, region):
        region = np.asarray(region, dtype=np.int64)
        u = exact.u(x, y, t)
        # -laplace(u) = 2 pi^2 u
        return sig[region] * exact.du_dt(x, y, t) + inv_mu[region] * 2.0 * math.pi ** 2 * u

    return source


def eddy_current_system(mesh: TriMesh, coeffs: Coefficients, source, u0_fn,
                        dofmap: DofMap | None = None) -> tuple[DegenerateSystem, DofMap]:
    """Discrete 2D eddy-current problem: R = sigma-mass on the conductor, A = (1/mu)-stiffness."""
    dofmap = dofmap or DofMap.from_mesh(mesh)
    R = assemble_mass_conductor(mesh, coeffs, dofmap)
    A = assemble_stiffness(mesh, coeffs, dofmap)
    S = assemble_stiffness(mesh, None, dofmap)
    sys = DegenerateSystem(
        R=R,
        A_of_t=lambda t: A,
        f_of_t=lambda t: assemble_load(mesh, dofmap, source, t),
        u0=interpolate(mesh, dofmap, u0_fn),
        lam=0.0,
        alpha=1.0 / coeffs.mu_max,
        x_gram=S,
    )
    return sys, dofmap


def _level_mesh(cfg: StudyConfig, prev: TriMesh | None) -> TriMesh:
    if prev is None:
        return generate_unit_square(cfg.n0, cfg.conductor)
    return refine_uniform(prev)


def run_level(mesh: TriMesh, cfg: StudyConfig, dt: float):
    """Solve the manufactured problem on one mesh; returns (trajectory, dofmap)."""
    coeffs = cfg.coefficients()
    exact = manufactured_solution()
    sys, dofmap = eddy_current_system(mesh, coeffs, manufactured_source(coeffs),
                                      lambda x, y: exact.u(x, y, 0.0))
    traj = run(sys, cfg.T, cfg.steps_for(dt))
    return traj, dofmap


def _fmt(v: float) -> str:
    return f"{v + 0.0:.5e}"  # folds -0.0 into 0.0


CSV_HEADER = "level,h,dt,err_H_pct,err_E_pct,err_max_sigma"


def run_convergence(cfg: StudyConfig, out_path=None) -> ErrorReport:
    """Solve on ``cfg.levels`` nested meshes and measure the errors on each.

    With ``out_path`` the CSV is written row by row, so completed levels
    survive a failure in a later one.
    """
    coeffs = cfg.coefficients()
    exact = manufactured_solution()
    report = ErrorReport()
    fh = open(out_path, "w", encoding="ascii", newline="\n") if out_path is not None else None
    try:
        if fh:
            fh.write(CSV_HEADER + "\n")
            fh.flush()
        mesh = None
        for k in range(cfg.levels):
            mesh = _level_mesh(cfg, mesh)
            dt = cfg.level_dt(k)
            traj, dofmap = run_level(mesh, cfg, dt)
            row = LevelResult(
                level=k,
                n=cfg.n0 * 2 ** k,
                h=mesh_size(mesh),
                dt=dt,
                err_H_pct=error_H_relative(traj, exact, mesh, dofmap, coeffs),
                err_E_pct=error_E_relative(traj, exact, mesh, dofmap, coeffs),
                err_max_sigma=error_max_sigma(traj, exact, mesh, dofmap, coeffs),
                err_H_pct_sq=error_H_relative(traj, exact, mesh, dofmap, coeffs, squared=True),
                err_E_pct_sq=error_E_relative(traj, exact, mesh, dofmap, coeffs, squared=True),
            )
            logger.info("level %d: n=%d h=%.4g dt=%.4g H=%.4f%% E=%.4f%%",
                        k, row.n, row.h, dt, row.err_H_pct, row.err_E_pct)
            report.rows.append(row)
            if fh:
                fh.write(",".join([str(k), _fmt(row.h), _fmt(dt), _fmt(row.err_H_pct),
                                   _fmt(row.err_E_pct), _fmt(row.err_max_sigma)]) + "\n")
                fh.flush()
        if cfg.levels >= 2:
            tail = report.rows[-max(2, cfg.levels - 1):]
            report.slope_H = fit_slope([(r.h, r.err_H_pct) for r in tail])
            report.slope_E = fit_slope([(r.h, r.err_E_pct) for r in tail])
            if fh:
                fh.write(f"# slope_H={_fmt(report.slope_H)}\n# slope_E={_fmt(report.slope_E)}\n")
    finally:
        if fh:
            fh.close()
    return report


def write_convergence_csv(report: ErrorReport, path) -> None:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(",".join([str(r.level), _fmt(r.h), _fmt(r.dt), _fmt(r.err_H_pct),
                               _fmt(r.err_E_pct), _fmt(r.err_max_sigma)]))
    if report.slope_H is not None:
        lines += [f"# slope_H={_fmt(report.slope_H)}", f"# slope_E={_fmt(report.slope_E)}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def cmd_solve(cfg: StudyConfig, out_dir, mesh: TriMesh | None = None, dump_steps: bool = False,
              problem: str = "manufactured") -> Trajectory:
    """Single run on the level-0 mesh (or ``mesh``) with time step ``cfg.dt0``.

    Writes ``final_state.csv``, ``field_E.csv``, ``field_H.csv`` and, with
    ``dump_steps``, ``states.csv`` holding one row per time level.
    """
    coeffs = cfg.coefficients()
    if mesh is None:
        mesh = generate_unit_square(cfg.n0, cfg.conductor)
    if problem == "manufactured":
        exact = manufactured_solution()
        source = manufactured_source(coeffs)
        u0_fn = lambda x, y: exact.u(x, y, 0.0)  # noqa: E731
    elif problem == "zero":
        source = lambda x, y, t, region: np.zeros_like(x)  # noqa: E731
        u0_fn = lambda x, y: np.zeros_like(x)  # noqa: E731
    else:
        raise ConfigError(f"unknown problem {problem!r}")
    sys, dofmap = eddy_current_system(mesh, coeffs, source, u0_fn)
    dt = cfg.dt0
    traj = run(sys, cfg.T, cfg.steps_for(dt))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    final = dofmap.expand(traj.states[-1])
    prev = dofmap.expand(traj.states[-2])
    e_field = reconstruct_E(final, prev, dt)
    h_field = reconstruct_H(mesh, None, final, coeffs)
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)

    _write_rows(out / "final_state.csv", "node,x,y,u",
                ([i, x, y, v] for i, ((x, y), v) in enumerate(zip(mesh.nodes, final))))
    _write_rows(out / "field_E.csv", "node,x,y,E_z",
                ([i, x, y, v] for i, ((x, y), v) in enumerate(zip(mesh.nodes, e_field))))
    _write_rows(out / "field_H.csv", "triangle,xc,yc,H_x,H_y",
                ([i, c[0], c[1], hv[0], hv[1]] for i, (c, hv) in enumerate(zip(centroids, h_field))))
    if dump_steps:
        header = "step,t," + ",".join(f"u{i}" for i in range(mesh.n_nodes))
        _write_rows(out / "states.csv", header,
                    ([k, t, *dofmap.expand(u)] for k, (t, u) in enumerate(zip(traj.times, traj.states))))
    return traj


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(float(v))
                              for v in row) + "\n")
