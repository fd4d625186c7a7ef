"""Backward Euler for d/dt(R u) + A(t) u = f(t) with R only positive semidefinite.

Each step solves ``(R + dt A(t_n)) u^n = dt f(t_n) + R u^{n-1}``. Where R
vanishes the equation is elliptic and carries no memory of the previous step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .sparsela import CsrMatrix, solve_spd, spmv

__all__ = [
    "DegenerateSystem",
    "Trajectory",
    "EllipticityViolation",
    "GardingReport",
    "step",
    "run",
    "check_garding",
]

logger = logging.getLogger(__name__)


class EllipticityViolation(ValueError):
    """Time step too large for the Garding constant: dt > 1/lambda."""


@dataclass(frozen=True, eq=False)
class DegenerateSystem:
    """Discrete problem data.

    ``A_of_t(t)`` and ``f_of_t(t)`` provide the operator and load at time t.
    ``lam`` and ``alpha`` are the Garding constants in
    ``lam <Rv,v> + <A(t)v,v> >= alpha ||v||_X^2``; ``x_gram`` is the Gram
    matrix of the X-norm (identity when omitted).
    """

    R: CsrMatrix
    A_of_t: Callable[[float], CsrMatrix]
    f_of_t: Callable[[float], np.ndarray]
    u0: np.ndarray
    lam: float = 0.0
    alpha: float = 1.0
    x_gram: CsrMatrix | None = None
    rtol: float = 1e-10

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.R.n,):
            raise ValueError(f"u0 has shape {u0.shape}, expected ({self.R.n},)")
        if self.lam < 0 or not self.alpha > 0:
            raise ValueError("need lam >= 0 and alpha > 0")
        object.__setattr__(self, "u0", u0)

    @property
    def n(self) -> int:
        return self.R.n

    def check_dt(self, dt: float) -> None:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if self.lam > 0 and dt > 1.0 / self.lam:
            raise EllipticityViolation(f"dt={dt} exceeds 1/lambda={1.0 / self.lam}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (N+1, n_dofs)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def __len__(self):
        return len(self.times)


def _rhs(sys: DegenerateSystem, u_prev, t_n, dt):
    f = np.asarray(sys.f_of_t(t_n), dtype=float)
    if f.shape != (sys.n,):
        raise ValueError(f"load at t={t_n} has shape {f.shape}, expected ({sys.n},)")
    return dt * f + spmv(sys.R, u_prev)


def step(sys: DegenerateSystem, u_prev, t_n: float, dt: float, *, step_matrix: CsrMatrix | None = None) -> np.ndarray:
    """One backward Euler step from ``u_prev`` to time ``t_n``.

    ``step_matrix`` may pass a precomputed ``R + dt A(t_n)``.
    """
    sys.check_dt(dt)
    u_prev = np.asarray(u_prev, dtype=float)
    if step_matrix is None:
        step_matrix = sys.R + sys.A_of_t(t_n).scaled(dt)
    b = _rhs(sys, u_prev, t_n, dt)
    return solve_spd(step_matrix, b, rtol=sys.rtol, x0=u_prev)


def run(sys: DegenerateSystem, T: float, N: int) -> Trajectory:
    """March from t=0 to t=T in N uniform steps."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    N = int(N)
    dt = T / N
    sys.check_dt(dt)
    times = np.arange(N + 1) * dt
    states = np.empty((N + 1, sys.n))
    states[0] = sys.u0
    last_a, m = None, None
    for k in range(1, N + 1):
        a = sys.A_of_t(times[k])
        # a constant-in-time provider hands back the same object; reuse its step matrix
        if a is not last_a:
            m = sys.R + a.scaled(dt)
            last_a = a
        states[k] = step(sys, states[k - 1], times[k], dt, step_matrix=m)
    logger.debug("run: %d steps of dt=%g on %d dofs", N, dt, sys.n)
    return Trajectory(times, states)


@dataclass
class GardingReport:
    min_ratio: float
    alpha: float
    n_samples: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.min_ratio >= self.alpha * (1 - 1e-9)


def check_garding(sys: DegenerateSystem, n_samples: int, times: Sequence[float], seed: int = 0) -> GardingReport:
    """Sampled lower bound of (lam v'Rv + v'A(t)v) / ||v||_X^2 over random v and the given times."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    gram = sys.x_gram if sys.x_gram is not None else CsrMatrix.identity(sys.n)
    v = rng.standard_normal((n_samples, sys.n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)

    def forms(m):
        return np.array([vi @ spmv(m, vi) for vi in v])

    r_form = forms(sys.R)
    norm_sq = forms(gram)
    best = np.inf
    for t in times:
        ratio = (sys.lam * r_form + forms(sys.A_of_t(t))) / norm_sq
        best = min(best, float(ratio.min()))
    return GardingReport(best, sys.alpha, n_samples)
