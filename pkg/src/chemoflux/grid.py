"""Discrete domains, field containers and grid integrals.

Three kinds of domain are supported: the unit interval and unit square
(uniform Cartesian cells) and the ball of radius R in N dimensions under
radial symmetry.  Homogeneous Neumann conditions are structural: every
boundary face carries zero flux, and the radial face at r = 0 has zero area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

KINDS = ("cartesian1d", "cartesian2d", "radial")


class GridMismatchError(ValueError):
    """A field was combined with a grid it does not live on."""


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 for dim=1, 2*pi for dim=2)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def ball_volume(radius: float, dim: int) -> float:
    return sphere_area(dim) * radius**dim / dim


@dataclass(frozen=True)
class GridSpec:
    """Immutable description of a discrete domain.

    ``cells`` and ``extents`` are per-axis tuples; a bare number is accepted
    and broadcast over the axes.  ``dim`` is the spatial dimension N: forced
    to 1 or 2 for the Cartesian kinds, required to be >= 2 for ``radial``.
    """

    kind: str
    cells: tuple = (128,)
    extents: tuple | None = None
    dim: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}; expected one of {KINDS}")
        naxes = 2 if self.kind == "cartesian2d" else 1
        cells = _as_tuple(self.cells, naxes, int, "cells")
        extents = _as_tuple(1.0 if self.extents is None else self.extents, naxes, float, "extents")
        if any(c < 4 for c in cells):
            raise ValueError(f"need at least 4 cells per axis, got {cells}")
        if any(not (e > 0 and math.isfinite(e)) for e in extents):
            raise ValueError(f"extents must be positive and finite, got {extents}")
        if self.kind == "radial":
            dim = 3 if self.dim is None else int(self.dim)
            if dim < 2:
                raise ValueError(f"radial grids need dim >= 2, got {dim}")
        else:
            dim = naxes
            if self.dim is not None and int(self.dim) != naxes:
                raise ValueError(f"{self.kind} grids have dim {naxes}, got {self.dim}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "dim", dim)

    @property
    def naxes(self) -> int:
        return len(self.cells)


def _as_tuple(value, n, cast, name):
    if np.isscalar(value):
        value = (value,) * n
    value = tuple(value)
    if len(value) != n:
        raise ValueError(f"{name} needs {n} entries, got {len(value)}")
    out = []
    for v in value:
        if cast is int and float(v) != int(v):
            raise ValueError(f"{name} entries must be integers, got {v!r}")
        out.append(cast(v))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Grid:
    """Geometry derived from a :class:`GridSpec`.

    Attributes
    ----------
    h : tuple of float
        Spacing per axis.
    shape : tuple of int
        Shape of cell-centred arrays.
    cell_volume : ndarray
        Measure of each cell, shaped like a field.
    face_area : tuple of ndarray
        Per-axis face measures; axis ``a`` has ``shape[a] + 1`` faces.
    centers : tuple of ndarray
        Cell-centre coordinates per axis (radius for radial grids).
    total_volume : float
        ``|Omega|`` from the analytic formula.
    """

    spec: GridSpec
    h: tuple
    shape: tuple
    cell_volume: np.ndarray = field(repr=False)
    face_area: tuple = field(repr=False)
    centers: tuple = field(repr=False)
    total_volume: float = 0.0
    coupling: tuple = field(default=(), repr=False)

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def ncells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def stencil_dim(self) -> int:
        return len(self.shape)

    def mesh(self):
        """Cell-centre coordinate arrays broadcast to the field shape."""
        return np.meshgrid(*self.centers, indexing="ij")

    @property
    def stiffness(self) -> sparse.csr_matrix:
        """Sparse ``L`` with ``L @ x.ravel() == stiffness_apply(x).ravel()``."""
        mat = self.__dict__.get("_stiffness")
        if mat is None:
            mat = _assemble_stiffness(self)
            object.__setattr__(self, "_stiffness", mat)
        return mat

    def check(self, f) -> None:
        if f.spec != self.spec:
            raise GridMismatchError(f"field lives on {f.spec}, not on {self.spec}")


def make_grid(spec: GridSpec) -> Grid:
    """Build the geometry for ``spec``.  Deterministic and side-effect free."""
    h = tuple(e / c for e, c in zip(spec.extents, spec.cells))
    centers = tuple((np.arange(c) + 0.5) * hh for c, hh in zip(spec.cells, h))
    if spec.kind == "radial":
        n, R, N = spec.cells[0], spec.extents[0], spec.dim
        omega = sphere_area(N)
        # faces at exact multiples of h so the last one sits on R
        r_face = np.arange(n + 1) * h[0]
        r_face[-1] = R
        shell = r_face**N
        volume = omega * np.diff(shell) / N
        area = omega * r_face ** (N - 1)
        area[0] = 0.0
        face_area = (area,)
        total = ball_volume(R, N)
    elif spec.kind == "cartesian1d":
        volume = np.full(spec.cells, h[0])
        face_area = (np.ones(spec.cells[0] + 1),)
        total = spec.extents[0]
    else:
        nx, ny = spec.cells
        volume = np.full((nx, ny), h[0] * h[1])
        face_area = (np.full((nx + 1, ny), h[1]), np.full((nx, ny + 1), h[0]))
        total = spec.extents[0] * spec.extents[1]
    # area/h on interior faces: the off-diagonal weights of the Laplacian
    coupling = tuple(np.moveaxis(np.moveaxis(a, i, 0)[1:-1], 0, i) / hh
                     for i, (a, hh) in enumerate(zip(face_area, h)))
    for a in face_area + coupling:
        a.flags.writeable = False
    volume.flags.writeable = False
    return Grid(spec=spec, h=h, shape=tuple(spec.cells), cell_volume=volume,
                face_area=face_area, centers=centers, total_volume=float(total),
                coupling=coupling)


@dataclass(eq=False)
class ScalarField:
    """Cell-centred values tagged with the spec of the grid they live on."""

    values: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.spec.cells):
            if self.values.size == int(np.prod(self.spec.cells)):
                self.values = self.values.reshape(self.spec.cells)
            else:
                raise GridMismatchError(
                    f"{self.values.size} values do not fit grid with cells {self.spec.cells}")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains NaN or Inf")

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(np.zeros(grid.shape), grid.spec)

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(np.full(grid.shape, float(value)), grid.spec)

    def copy(self) -> "ScalarField":
        return ScalarField(self.values.copy(), self.spec)


@dataclass(eq=False)
class FaceVectorField:
    """Face-normal components, one array per axis, boundary faces included.

    Boundary entries must be zero (no flux through the boundary).
    """

    components: tuple
    spec: GridSpec

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        cells = self.spec.cells
        for a, c in enumerate(comps):
            expect = list(cells)
            expect[a] += 1
            if c.shape != tuple(expect):
                raise GridMismatchError(f"axis {a} faces have shape {c.shape}, expected {tuple(expect)}")
        self.components = comps

    def boundary_max(self) -> float:
        out = 0.0
        for a, c in enumerate(self.components):
            lo = np.take(c, 0, axis=a)
            hi = np.take(c, -1, axis=a)
            out = max(out, float(np.max(np.abs(lo))), float(np.max(np.abs(hi))))
        return out


def integrate(f: ScalarField, g: Grid) -> float:
    g.check(f)
    return float(np.sum(f.values * g.cell_volume))


def lq_norm(f: ScalarField, g: Grid, q: float) -> float:
    """Discrete L^q norm ``(sum |f|^q vol)^(1/q)``.

    Values are rescaled by the max before powering so that large ``q`` does
    not overflow.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    g.check(f)
    a = np.abs(f.values)
    top = float(a.max())
    if top == 0.0:
        return 0.0
    if q == 1:
        return float(np.sum(a * g.cell_volume))
    return top * float(np.sum((a / top) ** q * g.cell_volume)) ** (1.0 / q)


def linf_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def face_difference(x: np.ndarray, g: Grid) -> tuple:
    """Normal differences ``(x_j - x_i)/h`` on every face; zero on the boundary."""
    out = []
    for a, h in enumerate(g.h):
        shape = list(x.shape)
        shape[a] += 1
        full = np.zeros(shape)
        np.moveaxis(full, a, 0)[1:-1] = np.moveaxis(np.diff(x, axis=a), a, 0) / h
        out.append(full)
    return tuple(out)


def _assemble_stiffness(g: Grid) -> sparse.csr_matrix:
    idx = np.arange(g.ncells).reshape(g.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(g.shape)
    for a, w in enumerate(g.coupling):
        ia = np.moveaxis(idx, a, 0)
        lo, hi = ia[:-1].ravel(), ia[1:].ravel()
        wa = np.moveaxis(w, a, 0).ravel()
        rows += [lo, hi]
        cols += [hi, lo]
        vals += [wa, wa]
        da = np.moveaxis(diag, a, 0)
        da[:-1] -= np.moveaxis(w, a, 0)
        da[1:] -= np.moveaxis(w, a, 0)
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    mat = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(g.ncells, g.ncells))
    return mat.tocsr()


def stiffness_apply(x: np.ndarray, g: Grid) -> np.ndarray:
    """``L x = sum_faces (area/h) (x_j - x_i)``, i.e. the Laplacian times volume."""
    out = np.zeros(x.shape)
    for a, w in enumerate(g.coupling):
        d = np.moveaxis(w * np.diff(x, axis=a), a, 0)
        oa = np.moveaxis(out, a, 0)
        oa[:-1] += d
        oa[1:] -= d
    return out


def face_divergence(fluxes, g: Grid) -> np.ndarray:
    """Net outflow per unit volume of face-normal fluxes (positive = leaving)."""
    total = np.zeros(g.shape)
    for a, (phi, area) in enumerate(zip(fluxes, g.face_area)):
        total += np.diff(area * phi, axis=a)
    return total / g.cell_volume
