import math

import numpy as np
import pytest

from chemoflux.elliptic import (
    EllipticConvergenceError,
    EllipticOptions,
    apply_operator,
    laplacian,
    pcg,
    residual,
    solve,
    solve_v,
)
from chemoflux.experiments import elliptic_convergence
from chemoflux.grid import GridSpec, ScalarField, integrate, make_grid

SPECS = [
    GridSpec("cartesian1d", 50),
    GridSpec("cartesian2d", (24, 17), (1.0, 0.7)),
    GridSpec("radial", 40, 1.0, 3),
    GridSpec("radial", 33, 2.0, 2),
]


def test_constant_is_in_kernel_of_laplacian():
    for spec in SPECS:
        g = make_grid(spec)
        out = apply_operator(ScalarField.full(g, 5.0), g, 1.0, 1.0)
        assert np.all(out.values == 5.0)


def test_cosine_laplacian_second_order():
    errs = []
    for n in (64, 128):
        g = make_grid(GridSpec("cartesian1d", n))
        x = g.centers[0]
        out = apply_operator(ScalarField(np.cos(np.pi * x), g.spec), g, 1.0, 1.0)
        errs.append(np.max(np.abs(out.values - (1 + np.pi**2) * np.cos(np.pi * x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


@pytest.mark.parametrize("spec", SPECS)
def test_operator_conserves_integral(spec):
    g = make_grid(spec)
    x = ScalarField(np.random.default_rng(3).random(g.shape), g.spec)
    out = apply_operator(x, g, 1.0, 1.0)
    assert integrate(out, g) == pytest.approx(integrate(x, g), rel=1e-12)


@pytest.mark.parametrize("spec", SPECS)
def test_operator_symmetric_in_volume_inner_product(spec):
    g = make_grid(spec)
    rng = np.random.default_rng(11)
    for _ in range(5):
        x = ScalarField(rng.normal(size=g.shape), g.spec)
        y = ScalarField(rng.normal(size=g.shape), g.spec)
        lhs = np.sum(apply_operator(x, g, 1.3, 0.7).values * y.values * g.cell_volume)
        rhs = np.sum(x.values * apply_operator(y, g, 1.3, 0.7).values * g.cell_volume)
        scale = np.sum(np.abs(apply_operator(x, g, 1.3, 0.7).values * y.values) * g.cell_volume)
        assert abs(lhs - rhs) <= 1e-12 * scale


@pytest.mark.parametrize("spec", SPECS)
@pytest.mark.parametrize("pc", ["fast", "jacobi", "none"])
def test_solve_residual_and_mass(spec, pc):
    g = make_grid(spec)
    opts = EllipticOptions(preconditioner=pc)
    b = ScalarField(np.random.default_rng(5).random(g.shape), g.spec)
    x = solve(b, g, 2.0, 0.3, opts)
    r = apply_operator(x, g, 2.0, 0.3).values - b.values
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b.values)
    assert 2.0 * integrate(x, g) == pytest.approx(integrate(b, g), rel=1e-10)


def test_solve_constant_exact():
    g = make_grid(GridSpec("cartesian2d", (16, 16)))
    x = solve(ScalarField.full(g, 3.0), g, 1.5, 2.0)
    assert np.all(x.values == 2.0)
    assert np.all(solve_v(ScalarField.full(g, 1.0), g).values == 1.0)
    assert np.all(solve_v(ScalarField.zeros(g), g).values == 0.0)


def test_solve_is_deterministic():
    g = make_grid(GridSpec("cartesian2d", (32, 32)))
    b = ScalarField(np.random.default_rng(9).random(g.shape), g.spec)
    a1 = solve(b, g, 1.0, 1.0).values
    a2 = solve(b, g, 1.0, 1.0).values
    assert np.array_equal(a1, a2)


@pytest.mark.parametrize("kind", ["cartesian1d", "cartesian2d"])
def test_manufactured_cosine_order_two(kind):
    study = elliptic_convergence(kind, (32, 64, 128, 256), k=2)
    for q in study.notes["orders"]:
        assert 1.8 <= q <= 2.2
    assert study.verdict == "pass"


def test_radial_manufactured_order():
    # x(r) = r^2 (R - r)^2 has zero slope at both ends; b = x - Lap x with
    # Lap x = x'' + (N-1)/r x' evaluated analytically
    R, N = 1.0, 3

    def exact(r):
        return r**2 * (R - r) ** 2

    def rhs(r):
        d1 = 2 * r * (R - r) ** 2 - 2 * r**2 * (R - r)
        d2 = 2 * (R - r) ** 2 - 8 * r * (R - r) + 2 * r**2
        return exact(r) - (d2 + (N - 1) / r * d1)

    errs, hs = [], []
    for n in (32, 64, 128, 256):
        g = make_grid(GridSpec("radial", n, R, N))
        r = g.centers[0]
        x = solve(ScalarField(rhs(r), g.spec), g, 1.0, 1.0)
        e = x.values - exact(r)
        errs.append(math.sqrt(np.sum(e * e * g.cell_volume)))
        hs.append(g.h[0])
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.8


@pytest.mark.parametrize("spec", SPECS)
def test_maximum_principle(spec):
    g = make_grid(spec)
    rng = np.random.default_rng(17)
    for _ in range(50):
        b = rng.random(g.shape) * (rng.random(g.shape) < 0.3)
        x = solve(ScalarField(b, g.spec), g, 1.0, 0.05 + rng.random())
        assert x.values.min() >= -1e-10 * b.max()


def test_solve_v_mass_and_residual():
    for spec in SPECS:
        g = make_grid(spec)
        u = ScalarField(np.random.default_rng(2).random(g.shape) * 4, g.spec)
        v = solve_v(u, g)
        assert integrate(v, g) == pytest.approx(integrate(u, g), rel=1e-10)
        assert residual(v, u, g) <= 1e-10


def test_nonconvergence_reports_residual():
    g = make_grid(GridSpec("cartesian2d", (64, 64)))
    b = np.random.default_rng(1).random(g.shape)
    with pytest.raises(EllipticConvergenceError) as info:
        pcg(b, g, 1.0, 1.0, EllipticOptions(rel_tol=1e-12, max_iter=10, preconditioner="none"))
    assert info.value.residual > 1e-12
    assert info.value.iterations == 10


def test_warm_start_is_used():
    g = make_grid(GridSpec("cartesian1d", 64))
    b = np.random.default_rng(4).random(g.shape)
    x, _, _ = pcg(b, g, 1.0, 1.0, EllipticOptions(preconditioner="jacobi"))
    _, its, _ = pcg(b, g, 1.0, 1.0, EllipticOptions(preconditioner="jacobi"), x0=x)
    assert its == 0


def test_invalid_options():
    with pytest.raises(ValueError):
        EllipticOptions(rel_tol=1e-3)
    with pytest.raises(ValueError):
        EllipticOptions(max_iter=5)
    with pytest.raises(ValueError):
        EllipticOptions(preconditioner="multigrid")
    g = make_grid(GridSpec("cartesian1d", 8))
    with pytest.raises(ValueError):
        solve(ScalarField.zeros(g), g, 0.0, 1.0)


def test_laplacian_of_quadratic_1d():
    # interior stencil is exact on quadratics
    g = make_grid(GridSpec("cartesian1d", 20))
    x = g.centers[0]
    lap = laplacian(x**2, g)
    assert np.allclose(lap[1:-1], 2.0, rtol=1e-10)
