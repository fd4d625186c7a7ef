import json
import math

import numpy as np
import pytest
import sympy as sp

from degenfem.assembly import Coefficients
from degenfem.mesh import Region
from degenfem.study import (MU0, ConfigError, StudyConfig, manufactured_solution, manufactured_source,
                            run_convergence, write_convergence_csv)


def symbolic_source(sigma, mu):
    x, y, t = sp.symbols("x y t")
    u = sp.exp(-5 * sp.pi * t) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    expr = sigma * sp.diff(u, t) - (sp.diff(u, x, 2) + sp.diff(u, y, 2)) / mu
    return sp.lambdify((x, y, t), expr, "numpy")


def test_source_at_center():
    c = Coefficients.uniform(MU0, 1e6)
    src = manufactured_source(c)
    dielectric = src(np.array(0.5), np.array(0.5), 0.0, Region.DIELECTRIC)
    assert dielectric == pytest.approx(2 * math.pi ** 2 / MU0, rel=1e-14)
    assert dielectric == pytest.approx(math.pi / 2 * 1e7, rel=1e-14)
    conductor = src(np.array(0.5), np.array(0.5), 0.0, Region.CONDUCTOR)
    # both terms recomputed independently: sigma*u_t = -5 pi 1e6, -(1/mu) lap u = 2 pi^2/mu = 5 pi 1e6
    sym = symbolic_source(sp.Integer(10) ** 6, 4 * sp.pi * sp.Rational(1, 10 ** 7))
    assert conductor == pytest.approx(float(sym(0.5, 0.5, 0.0)), abs=1e-6 * dielectric)
    assert abs(conductor) < 1e-8 * dielectric


def test_source_matches_symbolic_everywhere(rng):
    c = Coefficients.uniform(2.0, 3.0)
    src = manufactured_source(c)
    x, y, t = rng.random(20), rng.random(20), rng.random(20)
    for region, sigma in ((Region.CONDUCTOR, 3.0), (Region.DIELECTRIC, 0.0)):
        sym = symbolic_source(sigma, 2.0)
        np.testing.assert_allclose(src(x, y, t, np.full(20, region)), sym(x, y, t), rtol=1e-12, atol=1e-12)


def test_source_vanishes_on_boundary(rng):
    src = manufactured_source(Coefficients.uniform(MU0, 1e6))
    t = rng.random(10)
    s = rng.random(10)
    for x, y in ((0 * s, s), (0 * s + 1, s), (s, 0 * s), (s, 0 * s + 1)):
        for region in (Region.CONDUCTOR, Region.DIELECTRIC):
            assert np.all(np.abs(src(x, y, t, np.full(10, region))) < 1e-9 * 2 * math.pi ** 2 / MU0)


def test_exact_solution_derivatives():
    ex = manufactured_solution()
    x, y, t, h = 0.3, 0.7, 0.2, 1e-6
    assert ex.du_dt(x, y, t) == pytest.approx((ex.u(x, y, t + h) - ex.u(x, y, t - h)) / (2 * h), rel=1e-7)
    gx, gy = ex.grad_u(x, y, t)
    assert gx == pytest.approx((ex.u(x + h, y, t) - ex.u(x - h, y, t)) / (2 * h), rel=1e-7)
    assert gy == pytest.approx((ex.u(x, y + h, t) - ex.u(x, y - h, t)) / (2 * h), rel=1e-7)


def test_single_level_has_no_slope(tmp_path):
    out = tmp_path / "c.csv"
    rep = run_convergence(StudyConfig(levels=1, T=0.1), out)
    assert len(rep.rows) == 1 and rep.slope_H is None
    lines = out.read_text().splitlines()
    assert lines[0] == "level,h,dt,err_H_pct,err_E_pct,err_max_sigma"
    assert len(lines) == 2


def test_linear_scaling_H_decreasing():
    rep = run_convergence(StudyConfig(levels=4, n0=4, dt_scaling="linear"))
    h_err = [r.err_H_pct for r in rep.rows]
    assert all(a > b for a, b in zip(h_err, h_err[1:]))
    assert [r.h for r in rep.rows] == sorted((r.h for r in rep.rows), reverse=True)


def test_quadratic_scaling_E_ratio():
    rep = run_convergence(StudyConfig(levels=3, n0=4, dt_scaling="quadratic"))
    e = [r.err_E_pct for r in rep.rows]
    ratios = [a / b for a, b in zip(e, e[1:])]
    assert 3.5 < ratios[-1] < 4.5
    # squared variant doubles the slope
    e_sq = [r.err_E_pct_sq for r in rep.rows]
    assert e_sq[-2] / e_sq[-1] == pytest.approx(ratios[-1] ** 2, rel=1e-10)
    sig = [r.err_max_sigma for r in rep.rows]
    assert all(a > b for a, b in zip(sig, sig[1:]))


def test_fixed_scaling_dt():
    cfg = StudyConfig(levels=3, dt_scaling="fixed")
    assert [cfg.level_dt(k) for k in range(3)] == [0.025] * 3
    cfg = StudyConfig(levels=3, dt_scaling="quadratic")
    assert cfg.level_dt(2) == 0.025 / 16


def test_csv_writer_matches_streaming(tmp_path):
    cfg = StudyConfig(levels=2, T=0.2)
    streamed = tmp_path / "a.csv"
    rep = run_convergence(cfg, streamed)
    written = tmp_path / "b.csv"
    write_convergence_csv(rep, written)
    assert streamed.read_bytes() == written.read_bytes()
    assert streamed.read_text().splitlines()[-2].startswith("# slope_H=")


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        StudyConfig(levels=0)
    with pytest.raises(ConfigError):
        StudyConfig(dt_scaling="cubic")
    with pytest.raises(ConfigError, match="aligned"):
        StudyConfig(n0=4, conductor=(0.3, 0.25, 0.75, 0.75))
    with pytest.raises(ConfigError):
        StudyConfig(T=1.0, dt0=0.3).steps_for(0.3)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"levels": 2, "bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        StudyConfig.from_json(p)
    p.write_text(json.dumps({"levels": 2, "n0": 8}))
    cfg = StudyConfig.from_json(p, levels=3)
    assert cfg.levels == 3 and cfg.n0 == 8 and cfg.dt0 == 0.025
