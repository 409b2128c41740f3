"""Helmholtz-Neumann solves ``(c0 I - c1 Lap_h) x = b``.

The finite-volume Laplacian is assembled matrix-free from face fluxes, so the
system is symmetric positive definite in the volume-weighted inner product.
It is solved by preconditioned conjugate gradients.  Two preconditioners are
available: ``"jacobi"`` (diagonal) and ``"fast"``, which inverts the operator
exactly on uniform grids (DCT-II diagonalisation for Cartesian kinds, banded
Cholesky for radial grids) so that CG only has to mop up round-off.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, linalg

from .grid import Grid, GridSpec, ScalarField, make_grid, stiffness_apply

PRECONDITIONERS = ("fast", "jacobi", "none")


class EllipticConvergenceError(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class EllipticOptions:
    rel_tol: float = 1e-10
    max_iter: int | None = None  # None -> 10 * number of cells
    preconditioner: str = "fast"

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-4):
            raise ValueError(f"rel_tol must lie in (0, 1e-4], got {self.rel_tol}")
        if self.max_iter is not None and self.max_iter < 10:
            raise ValueError(f"max_iter must be >= 10, got {self.max_iter}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")

    def iteration_cap(self, g: Grid) -> int:
        return self.max_iter if self.max_iter is not None else 10 * g.ncells


def laplacian(x: np.ndarray, g: Grid) -> np.ndarray:
    """Conservative finite-volume Laplacian; zero flux through the boundary."""
    return stiffness_apply(x, g) / g.cell_volume


def _apply(x, g, c0, c1):
    return c0 * x - c1 * laplacian(x, g)


def apply_operator(x: ScalarField, g: Grid, c0: float, c1: float) -> ScalarField:
    """Return ``c0 x - c1 Lap_h x``."""
    g.check(x)
    return ScalarField(_apply(x.values, g, c0, c1), g.spec)


def _check_coeffs(c0, c1):
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    if not c1 >= 0:
        raise ValueError(f"c1 must be nonnegative, got {c1}")


def _diagonal(g, c0, c1):
    # diagonal of the volume-scaled operator  c0 V - c1 L
    d = c0 * g.cell_volume.copy()
    for a, w in enumerate(g.coupling):
        da = np.moveaxis(d, a, 0)
        wa = np.moveaxis(w, a, 0)
        da[:-1] += c1 * wa
        da[1:] += c1 * wa
    return d


@lru_cache(maxsize=8)
def _dct_symbol(spec: GridSpec):
    """Eigenvalues of ``-V^-1 L`` in the DCT-II basis, and the cell volume."""
    g = make_grid(spec)
    eig = np.zeros(g.shape)
    for a, (n, h) in enumerate(zip(g.shape, g.h)):
        lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)) / h**2
        shape = [1] * len(g.shape)
        shape[a] = n
        eig = eig + lam.reshape(shape)
    return eig


def _fast_preconditioner(g, c0, c1):
    """Exact inverse of ``c0 V - c1 L`` on the residual, as a callable."""
    if g.kind == "radial":
        ab = np.zeros((2, g.shape[0]))
        ab[0, 1:] = -c1 * g.coupling[0]
        ab[1] = _diagonal(g, c0, c1)
        factor = linalg.cholesky_banded(ab)
        return lambda r: linalg.cho_solve_banded((factor, False), r)
    # uniform cells: V is a scalar multiple of the identity
    scale = g.cell_volume.flat[0] * (c0 + c1 * _dct_symbol(g.spec))

    def apply(r):
        return fft.idctn(fft.dctn(r, type=2, norm="ortho") / scale, type=2, norm="ortho")

    return apply


def _preconditioner(g, c0, c1, kind):
    if kind == "fast":
        return _fast_preconditioner(g, c0, c1)
    if kind == "jacobi":
        inv = 1.0 / _diagonal(g, c0, c1)
        return lambda r: inv * r
    return lambda r: r


def pcg(b: np.ndarray, g: Grid, c0: float, c1: float, opts: EllipticOptions,
        x0: np.ndarray | None = None):
    """Solve and return ``(x, iterations, relative_residual)``.

    Runs CG on the volume-scaled symmetric system ``(c0 V - c1 L) x = V b``;
    convergence is judged on the unscaled residual ``||c0 x - c1 Lap_h x - b||_2``.
    The default initial guess ``b / c0`` is exact for constant data.
    """
    _check_coeffs(c0, c1)
    vol = g.cell_volume
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(g.shape), 0, 0.0
    target = opts.rel_tol * bnorm
    cap = opts.iteration_cap(g)
    x = (b / c0) if x0 is None else np.array(x0, dtype=float)
    precond = _preconditioner(g, c0, c1, opts.preconditioner)
    exact = opts.preconditioner == "fast"
    rhs = vol * b

    L = g.stiffness
    shape = g.shape

    def scaled(y):
        return c0 * vol * y - c1 * (L @ y.ravel()).reshape(shape)

    it = 0
    while True:
        # restart from the true residual so that drift in the recursion
        # cannot fake convergence
        r = rhs - scaled(x)
        res = float(np.linalg.norm(r / vol))
        if res <= target:
            # the operator maps constants to c0 * constants, so this shift
            # zeroes the residual's integral: c0 * int x = int b to round-off
            x = x + float(np.sum(r)) / (c0 * float(np.sum(vol)))
            return x, it, res / bnorm
        if it >= cap:
            raise EllipticConvergenceError(
                f"PCG did not converge in {it} iterations (relative residual {res / bnorm:.3e})",
                res / bnorm, it)
        z = precond(r)
        if exact and it == 0:
            # direct correction; CG only runs if round-off defeats it
            x = x + z
            it = 1
            continue
        p = z.copy()
        rz = float(np.vdot(r, z))
        start = it
        while it < cap:
            q = scaled(p)
            pq = float(np.vdot(p, q))
            if pq <= 0.0:
                break
            alpha = rz / pq
            x = x + alpha * p
            r = r - alpha * q
            it += 1
            if float(np.linalg.norm(r / vol)) <= target:
                break
            z = precond(r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        if it == start:
            # breakdown without progress; report via the outer check
            it = cap


def solve(b: ScalarField, g: Grid, c0: float, c1: float,
          opts: EllipticOptions | None = None, x0: ScalarField | None = None) -> ScalarField:
    """Solve ``(c0 I - c1 Lap_h) x = b`` with homogeneous Neumann conditions.

    Raises
    ------
    EllipticConvergenceError
        If the residual target is not met within ``opts.max_iter`` iterations;
        the final relative residual is attached.
    """
    g.check(b)
    if x0 is not None:
        g.check(x0)
    opts = opts or EllipticOptions()
    x, _, _ = pcg(b.values, g, c0, c1, opts, None if x0 is None else x0.values)
    return ScalarField(x, g.spec)


def solve_v(u: ScalarField, g: Grid, opts: EllipticOptions | None = None,
            x0: ScalarField | None = None) -> ScalarField:
    """Chemical signal for density ``u``: solve ``-Lap v + v = u``."""
    return solve(u, g, 1.0, 1.0, opts, x0)


def residual(v: ScalarField, u: ScalarField, g: Grid) -> float:
    """Relative residual ``||(I - Lap_h) v - u||_2 / ||u||_2`` (absolute if u = 0)."""
    g.check(v)
    g.check(u)
    r = float(np.linalg.norm(_apply(v.values, g, 1.0, 1.0) - u.values))
    un = float(np.linalg.norm(u.values))
    return r / un if un > 0 else r
