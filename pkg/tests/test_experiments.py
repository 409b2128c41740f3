import math

import numpy as np
import pytest

from chemoflux.config import default_config, parse_config
from chemoflux.experiments import (
    InitialData,
    elliptic_convergence,
    exponent_sweep,
    in_bounded_regime,
    make_initial,
    mesh_convergence,
    regularization_study,
    restrict,
    simulate,
)
from chemoflux.grid import GridSpec, integrate, make_grid


def test_constant_initial():
    g = make_grid(GridSpec("cartesian2d", (8, 8)))
    assert np.all(make_initial(InitialData("constant", base=1.0), g).values == 1.0)


def test_perturbed_constant_initial():
    g = make_grid(GridSpec("cartesian1d", 64))
    u = make_initial(InitialData("perturbed_constant", amplitude=0.1, base=1.0, modes=(1,)), g)
    assert 0.9 <= u.values.min() and u.values.max() <= 1.1
    x = g.centers[0]
    assert np.allclose(u.values, 1 + 0.1 * np.cos(np.pi * x))
    with pytest.raises(ValueError):
        InitialData("perturbed_constant", amplitude=2.0, base=1.0)


def test_gaussian_mass():
    g = make_grid(GridSpec("cartesian2d", (128, 128)))
    u = make_initial(InitialData("gaussian_bump", amplitude=4.0, width=0.05), g)
    assert integrate(u, g) == pytest.approx(4 * 2 * math.pi * 0.05**2, rel=0.01)
    assert u.values.min() >= 0


def test_gaussian_radial_centre_only():
    g = make_grid(GridSpec("radial", 32, 1.0, 3))
    u = make_initial(InitialData(width=0.1), g)
    assert u.values[0] == pytest.approx(4.0, rel=2e-2)
    with pytest.raises(ValueError):
        make_initial(InitialData(center=(0.5,)), g)


def test_invalid_initial():
    for kw in (dict(kind="ring"), dict(base=-1.0), dict(amplitude=-1.0), dict(width=0.0)):
        with pytest.raises(ValueError):
            InitialData(**kw)


def test_in_bounded_regime():
    assert in_bounded_regime(1.9, 2)
    assert in_bounded_regime(1.4, 3)
    assert not in_bounded_regime(1.6, 3)


def small_cfg(*overrides):
    return parse_config("grid.kind = cartesian2d\ngrid.cells = 24\nmodel.p = 1.4\n"
                        "initial.width = 0.1\n", overrides)


def test_regularization_without_chemotaxis_is_exact():
    cfg = small_cfg("model.chi=0")
    res = regularization_study(cfg, n_list=(1, 4, math.inf), t_eval=0.2)
    assert all(r["e_linf"] == 0.0 and r["e_l2"] == 0.0 for r in res.rows)
    assert res.verdict == "pass"
    assert "model.chi = 0.0" in res.config_echo


def test_regularization_small_gradient_regime():
    # |grad v|^(p-1) / n stays below 1e-8, so every n is within 1e-8 of n = inf
    cfg = parse_config("grid.kind = cartesian1d\ngrid.cells = 32\nmodel.p = 1.9\n"
                       "initial.kind = perturbed_constant\ninitial.base = 1\n"
                       "initial.amplitude = 1e-9\n", ())
    res = regularization_study(cfg, n_list=(1, 4, 16, math.inf), t_eval=0.2)
    assert all(r["e_linf"] <= 1e-8 for r in res.rows)


def test_regularization_benchmark_like_decreases():
    res = regularization_study(small_cfg(), n_list=(1, 4, 16, 64, math.inf), t_eval=0.2)
    e = res.column("e_linf")[:-1]
    assert all(b < a for a, b in zip(e, e[1:]))
    assert res.verdict == "pass"
    assert res.columns == ["n_reg", "e_linf", "e_l2", "verdict"]


def test_regularization_parallel_matches_serial():
    cfg = small_cfg()
    a = regularization_study(cfg, n_list=(1, math.inf), t_eval=0.05, jobs=1)
    b = regularization_study(cfg, n_list=(1, math.inf), t_eval=0.05, jobs=2)
    assert a.rows == b.rows


def test_exponent_sweep_rows():
    cfg = small_cfg("run.t_end=0.5", "run.monitor_every=0.05")
    res = exponent_sweep(cfg, p_list=(1.2, 1.45))
    assert [r["p"] for r in res.rows] == [1.2, 1.45]
    assert all(r["verdict"] == "completed" for r in res.rows)
    assert all(r["boundedness"] == "bounded" for r in res.rows)
    assert all(r["theory_bounded"] for r in res.rows)


def test_restrict_preserves_integral():
    fine = make_grid(GridSpec("radial", 32, 1.0, 3))
    coarse = make_grid(GridSpec("radial", 16, 1.0, 3))
    u = np.random.default_rng(0).random(32)
    c = restrict(u, fine, coarse)
    assert np.sum(c * coarse.cell_volume) == pytest.approx(np.sum(u * fine.cell_volume), rel=1e-13)
    f2 = make_grid(GridSpec("cartesian2d", (8, 8)))
    c2 = make_grid(GridSpec("cartesian2d", (4, 4)))
    assert np.allclose(restrict(np.ones((8, 8)), f2, c2), 1.0)


def test_mesh_convergence_heat_equation_order_two():
    cfg = parse_config("grid.kind = cartesian1d\nmodel.p = 1.4\nmodel.chi = 0\nmodel.mu = 0\n"
                       "initial.kind = perturbed_constant\ninitial.base = 1\n"
                       "initial.amplitude = 0.5\ndt.dt_max = 1e-3\n", ())
    res = mesh_convergence(cfg, h_list=(1 / 16, 1 / 32, 1 / 64, 1 / 128), t_eval=0.1,
                           dt_exponent=2, order_range=(1.8, 2.2))
    assert all(1.8 <= q <= 2.2 for q in res.notes["orders"]), res.notes
    assert res.verdict == "pass"


def test_mesh_convergence_rejects_bad_levels():
    cfg = small_cfg()
    with pytest.raises(ValueError):
        mesh_convergence(cfg, h_list=(1 / 8, 1 / 16))
    with pytest.raises(ValueError):
        mesh_convergence(cfg, h_list=(1 / 8, 1 / 24, 1 / 72))


def test_elliptic_convergence_study():
    res = elliptic_convergence("cartesian1d", (32, 64, 128, 256))
    assert res.verdict == "pass"
    assert math.isnan(res.rows[0]["order"])


def test_simulate_reports_initial_mass():
    cfg = default_config("radial", 1.2, t_end=0.1, monitor_every=0.05)
    res = simulate(cfg)
    assert res.verdict == "completed"
    assert res.m0 == pytest.approx(res.series[0].mass)
