"""Flux-limited chemotactic transport.

The face flux is ``F = |g|^(p-2) g_n / (1 + |g|^(p-1) / n_reg)`` where ``g`` is
the reconstructed gradient of the signal and ``g_n`` its face-normal
component.  It is always evaluated as ``|g|^(p-1) / (1 + |g|^(p-1)/n_reg)``
times the direction cosine ``g_n / |g|``, never through the singular factor
``|g|^(p-2)`` alone.  The density is carried by donor-cell upwinding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import FaceVectorField, Grid, ScalarField, face_difference, face_divergence


@dataclass(frozen=True)
class LimiterParams:
    """Exponent ``p`` in (1, 2), regularisation index ``n_reg`` (``math.inf``
    for the unregularised flux) and the gradient floor below which the flux
    is exactly zero."""

    p: float
    n_reg: float = math.inf
    grad_floor: float = 1e-14

    def __post_init__(self):
        if not (1.0 < self.p < 2.0):
            raise ValueError(f"p in (1,2) required, got p={self.p}")
        if not self.n_reg > 0:
            raise ValueError(f"n_reg must be positive or inf, got {self.n_reg}")
        if not self.grad_floor >= 0:
            raise ValueError(f"grad_floor must be >= 0, got {self.grad_floor}")


def face_gradient(v: ScalarField, g: Grid) -> FaceVectorField:
    g.check(v)
    return FaceVectorField(face_difference(v.values, g), g.spec)


def face_gradient_magnitude(v: ScalarField, g: Grid, normal=None) -> tuple:
    """Euclidean gradient norm on every face, one array per axis.

    On 2D grids the tangential component at a face is the mean of the two
    neighbouring cell-centred central differences (one-sided at the edge
    cells), so linear fields are reproduced exactly.  Boundary faces carry
    only the tangential part since the normal derivative vanishes there.
    """
    g.check(v)
    if normal is None:
        normal = face_difference(v.values, g)
    if len(g.shape) == 1:
        return (np.abs(normal[0]),)
    v = v.values
    hx, hy = g.h
    # one-sided at the edge cells, central inside
    gx = np.empty_like(v)
    gx[1:-1] = (v[2:] - v[:-2]) / (2 * hx)
    gx[0] = (v[1] - v[0]) / hx
    gx[-1] = (v[-1] - v[-2]) / hx
    gy = np.empty_like(v)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * hy)
    gy[:, 0] = (v[:, 1] - v[:, 0]) / hy
    gy[:, -1] = (v[:, -1] - v[:, -2]) / hy
    ty = np.empty(normal[0].shape)
    ty[1:-1] = 0.5 * (gy[:-1] + gy[1:])
    ty[0], ty[-1] = gy[0], gy[-1]
    tx = np.empty(normal[1].shape)
    tx[:, 1:-1] = 0.5 * (gx[:, :-1] + gx[:, 1:])
    tx[:, 0], tx[:, -1] = gx[:, 0], gx[:, -1]
    return (np.sqrt(normal[0] ** 2 + ty**2), np.sqrt(normal[1] ** 2 + tx**2))


def limiter_value(gnorm, g_normal, lp: LimiterParams):
    """Limited flux for arrays of gradient norms and normal components."""
    gnorm = np.asarray(gnorm, dtype=float)
    g_normal = np.asarray(g_normal, dtype=float)
    active = gnorm > lp.grad_floor
    safe = np.where(active, gnorm, 1.0)
    s = safe ** (lp.p - 1.0)
    if math.isinf(lp.n_reg):
        mag = s
    else:
        mag = s / (1.0 + s / lp.n_reg)
        # rounding guard: the exact value never exceeds either bound
        mag = np.minimum(mag, np.minimum(s, lp.n_reg))
    direction = np.clip(g_normal / safe, -1.0, 1.0)
    return np.where(active, mag * direction, 0.0)


def limited_flux(gnorm, gdir: FaceVectorField, lp: LimiterParams) -> FaceVectorField:
    """Face-normal flux ``|g|^(p-2) g_n / (1 + |g|^(p-1)/n_reg)`` on every face.

    ``gnorm`` holds the per-axis face gradient norms (as returned by
    :func:`face_gradient_magnitude`), ``gdir`` the normal components.
    """
    if not (1.0 < lp.p < 2.0):
        raise ValueError(f"p in (1,2) required, got p={lp.p}")
    comps = tuple(limiter_value(m, c, lp) for m, c in zip(gnorm, gdir.components))
    return FaceVectorField(comps, gdir.spec)


def chemotactic_flux(v: ScalarField, g: Grid, lp: LimiterParams) -> tuple:
    """Return ``(F, gnorm)`` for signal ``v``."""
    gdir = face_gradient(v, g)
    gnorm = face_gradient_magnitude(v, g, gdir.components)
    return limited_flux(gnorm, gdir, lp), gnorm


def upwind_face_flux(u: np.ndarray, F: FaceVectorField, chi: float, g: Grid) -> tuple:
    """Donor-cell face fluxes ``chi * F * u_donor`` per axis."""
    out = []
    for a, f in enumerate(F.components):
        ua = np.moveaxis(u, a, 0)
        fa = np.moveaxis(f, a, 0)
        inner = fa[1:-1]
        phi = np.zeros_like(fa)
        phi[1:-1] = chi * inner * np.where(inner > 0, ua[:-1], ua[1:])
        out.append(np.moveaxis(phi, 0, a))
    return tuple(out)


def upwind_divergence(u: ScalarField, F: FaceVectorField, chi: float, g: Grid) -> ScalarField:
    """Conservative divergence of ``chi u F`` with donor-cell ``u``.

    The transport contribution to ``u_t`` is minus the returned field.
    Boundary faces must carry zero flux.
    """
    g.check(u)
    if F.spec != g.spec:
        g.check(F)
    if F.boundary_max() != 0.0:
        raise ValueError("boundary faces of F must be zero")
    return ScalarField(face_divergence(upwind_face_flux(u.values, F, chi, g), g), g.spec)


def stencil_factor(g: Grid) -> float:
    """``max_i sum_faces area / vol_i``; equals ``2d/h`` on uniform Cartesian grids."""
    cached = g.__dict__.get("_stencil_factor")
    if cached is not None:
        return cached
    tot = np.zeros(g.shape)
    for a, area in enumerate(g.face_area):
        aa = np.moveaxis(area, a, 0)
        tot += np.moveaxis(aa[:-1] + aa[1:], 0, a)
    value = float(np.max(tot / g.cell_volume))
    g.__dict__["_stencil_factor"] = value
    return value
