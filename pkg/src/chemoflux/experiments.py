"""Initial data, canned configurations and multi-run studies.

Every study is a pure function of its configuration: rows come back in
configuration order whether or not they were computed in parallel.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import elliptic
from .grid import Grid, GridSpec, ScalarField, make_grid
from .integrator import run
from .monitors import StepAudit, boundedness_verdict

logger = logging.getLogger(__name__)

INITIAL_KINDS = ("constant", "gaussian_bump", "perturbed_constant")


@dataclass(frozen=True)
class InitialData:
    """Parameters of the initial density.

    ``constant``: ``base`` everywhere.  ``gaussian_bump``:
    ``base + amplitude * exp(-|x - center|^2 / (2 width^2))``.
    ``perturbed_constant``: ``base + amplitude * prod_i cos(modes_i pi x_i / L_i)``.
    ``center=None`` means the middle of a Cartesian box or the origin of a ball.
    """

    kind: str = "gaussian_bump"
    amplitude: float = 4.0
    center: tuple | None = None
    width: float = 0.05
    base: float = 0.0
    modes: tuple = (1,)

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"initial kind must be one of {INITIAL_KINDS}, got {self.kind!r}")
        if not self.base >= 0:
            raise ValueError("base level must be nonnegative")
        if self.kind == "gaussian_bump":
            if not self.amplitude >= 0:
                raise ValueError("gaussian amplitude must be nonnegative")
            if not self.width > 0:
                raise ValueError("gaussian width must be positive")
        if self.kind == "perturbed_constant" and abs(self.amplitude) > self.base:
            raise ValueError("perturbation amplitude exceeds base level; data would go negative")
        if np.isscalar(self.modes):
            object.__setattr__(self, "modes", (int(self.modes),))
        if self.center is not None and np.isscalar(self.center):
            object.__setattr__(self, "center", (float(self.center),))


def make_initial(data: InitialData, g: Grid) -> ScalarField:
    coords = g.mesh()
    if data.kind == "constant":
        return ScalarField.full(g, data.base)
    if data.kind == "perturbed_constant":
        modes = data.modes if len(data.modes) == len(coords) else data.modes[:1] * len(coords)
        prod = np.ones(g.shape)
        for x, k, L in zip(coords, modes, g.spec.extents):
            prod = prod * np.cos(k * np.pi * x / L)
        return ScalarField(data.base + data.amplitude * prod, g.spec)
    if g.kind == "radial":
        if data.center not in (None, (0.0,)):
            raise ValueError("radial grids only admit a bump centred at the origin")
        center = (0.0,)
    else:
        center = data.center or tuple(0.5 * L for L in g.spec.extents)
        if len(center) != len(coords):
            raise ValueError(f"center needs {len(coords)} coordinates")
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    bump = data.amplitude * np.exp(-r2 / (2.0 * data.width**2))
    slope = _boundary_slope(data, center, g)
    if slope > 1e-12:
        logger.warning("gaussian bump has boundary-normal slope %.2e; not Neumann compatible", slope)
    return ScalarField(data.base + bump, g.spec)


def _boundary_slope(data, center, g):
    worst = 0.0
    s2 = data.width**2
    for c, L in zip(center, g.spec.extents):
        walls = (L,) if g.kind == "radial" else (0.0, L)
        for w in walls:
            d = w - c
            worst = max(worst, data.amplitude * abs(d) / s2 * math.exp(-d * d / (2 * s2)))
    return worst


def in_bounded_regime(p: float, dim: int) -> bool:
    """Whether ``(p, N)`` lies in the range covered by the uniform bound:
    ``p < 2`` for N <= 2 and ``p < 3/2`` for N >= 3."""
    if dim <= 2:
        return 1.0 < p < 2.0
    return 1.0 < p < 1.5


@dataclass
class SimulationResult:
    grid: Grid
    series: list
    final: object
    verdict: str
    audit: StepAudit
    m0: float


def simulate(cfg, spec: GridSpec | None = None) -> SimulationResult:
    """Run the trajectory described by a :class:`~chemoflux.config.RunConfig`."""
    g = make_grid(spec or cfg.grid)
    u0 = make_initial(cfg.initial, g)
    series = []
    audit = StepAudit(g, cfg.model.mu)
    final, verdict = run(u0, cfg.model, g, cfg.dt, cfg.t_end, cfg.monitor_every,
                         sink=series.append, qlist=cfg.qlist, step_hook=audit)
    return SimulationResult(g, series, final, verdict, audit, float(np.sum(u0.values * g.cell_volume)))


@dataclass
class StudyResult:
    """Tabular study outcome with a full configuration echo."""

    name: str
    columns: list
    rows: list
    verdict: str
    config_echo: str = ""
    notes: dict = field(default_factory=dict)

    def column(self, name):
        return [r[name] for r in self.rows]


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _echo(cfg):
    from .config import render

    return render(cfg)


def _with_nreg(cfg, n):
    lim = replace(cfg.model.limiter, n_reg=n)
    return replace(cfg, model=replace(cfg.model, limiter=lim), t_end=cfg.study.t_eval,
                   monitor_every=cfg.study.t_eval)


def _final_u(cfg):
    res = simulate(cfg)
    return res.final.u.values, res.verdict


def regularization_study(cfg, n_list=None, t_eval=None, jobs=None) -> StudyResult:
    """Distance between regularised runs and the unregularised one at ``t_eval``.

    Passes when both the L-infinity and L2 errors are nonincreasing in the
    (finite, sorted) regularisation index and the largest index has at most a
    quarter of the error of the smallest.  Nonmonotonicity smaller than 1e-10
    is reported as ``inconclusive`` rather than ``fail``.
    """
    study = cfg.study
    if t_eval is not None:
        study = replace(study, t_eval=t_eval)
    if n_list is not None:
        study = replace(study, n_list=tuple(n_list))
    cfg = replace(cfg, study=study)
    finite = sorted(n for n in study.n_list if not math.isinf(n))
    configs = [_with_nreg(cfg, n) for n in finite] + [_with_nreg(cfg, math.inf)]
    outs = _map(_final_u, configs, study.jobs if jobs is None else jobs)
    g = make_grid(cfg.grid)
    u_inf, v_inf = outs[-1]
    rows = []
    for n, (u, verdict) in zip(finite, outs[:-1]):
        diff = u - u_inf
        rows.append({
            "n_reg": n,
            "e_linf": float(np.max(np.abs(diff))),
            "e_l2": float(np.sqrt(np.sum(diff * diff * g.cell_volume))),
            "verdict": verdict,
        })
    rows.append({"n_reg": math.inf, "e_linf": 0.0, "e_l2": 0.0, "verdict": v_inf})
    failed = [r for r in rows if r["verdict"] != "completed"]
    if failed:
        overall = f"fail:{failed[0]['verdict']}"
    else:
        overall = _monotone_verdict([r for r in rows if not math.isinf(r["n_reg"])])
    return StudyResult("regularization", ["n_reg", "e_linf", "e_l2", "verdict"], rows, overall,
                       _echo(cfg))


def _monotone_verdict(rows):
    if len(rows) < 2:
        return "inconclusive"
    verdict = "pass"
    for key in ("e_linf", "e_l2"):
        e = [r[key] for r in rows]
        rises = [b - a for a, b in zip(e, e[1:]) if b > a]
        if rises and max(rises) > 1e-10:
            return "fail"
        if rises:
            verdict = "inconclusive"
        if not e[-1] <= 0.25 * e[0]:
            return "fail"
    return verdict


def _sweep_row(item):
    cfg, spec = item
    res = simulate(cfg, spec)
    peaks = [r.max_u for r in res.series]
    try:
        bounded = boundedness_verdict(res.series, cfg.study.window_split)
    except ValueError:
        bounded = "inconclusive"
    return {
        "grid": spec.kind,
        "dim": spec.dim,
        "cells": spec.cells[0],
        "p": cfg.model.limiter.p,
        "theory_bounded": in_bounded_regime(cfg.model.limiter.p, spec.dim),
        "initial_max": peaks[0],
        "peak_max_u": max(peaks),
        "t_final": res.final.t,
        "boundedness": bounded,
        "verdict": res.verdict,
    }


def exponent_sweep(cfg, p_list=None, grids=None, t_end=None, jobs=None) -> StudyResult:
    """Boundedness classification over exponents and grids.  Never raises for a
    failed run; the failure shows up in that row's verdict."""
    p_list = tuple(cfg.study.p_list if p_list is None else p_list)
    grids = [cfg.grid] if grids is None else list(grids)
    base = cfg if t_end is None else replace(cfg, t_end=t_end)
    items = []
    for spec in grids:
        for p in p_list:
            lim = replace(base.model.limiter, p=p)
            items.append((replace(base, model=replace(base.model, limiter=lim), grid=spec), spec))
    rows = _map(_sweep_row, items, cfg.study.jobs if jobs is None else jobs)
    cols = ["grid", "dim", "cells", "p", "theory_bounded", "initial_max", "peak_max_u",
            "t_final", "boundedness", "verdict"]
    return StudyResult("exponent_sweep", cols, rows, "done", _echo(cfg))


def restrict(u: np.ndarray, fine: Grid, coarse: Grid) -> np.ndarray:
    """Volume-weighted average of a fine field onto a grid twice as coarse."""
    w = u * fine.cell_volume
    for a in range(u.ndim):
        n = coarse.shape[a]
        w = np.moveaxis(w, a, 0)
        w = (w[0::2] + w[1::2])[:n]
        w = np.moveaxis(w, 0, a)
    return w / coarse.cell_volume


def _observed_orders(diffs):
    return [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(diffs, diffs[1:])]


def _level_specs(cfg, h_list):
    h_list = sorted(h_list, reverse=True)
    if len(h_list) < 3:
        raise ValueError("mesh convergence needs at least 3 grid levels")
    for a, b in zip(h_list, h_list[1:]):
        if not math.isclose(a / b, 2.0, rel_tol=1e-9):
            raise ValueError("grid levels must refine by a factor of 2")
    specs = []
    for h in h_list:
        cells = tuple(int(round(L / h)) for L in cfg.grid.extents)
        if any(not math.isclose(c * h, L, rel_tol=1e-9) for c, L in zip(cells, cfg.grid.extents)):
            raise ValueError(f"spacing {h} does not divide the domain")
        specs.append(replace(cfg.grid, cells=cells))
    return h_list, specs


def _level_run(item):
    cfg, spec = item
    res = simulate(cfg, spec)
    return res.final.u.values, res.verdict


def mesh_convergence(cfg, h_list=None, t_eval=None, dt_exponent=1, order_range=(0.8, 1.5),
                     jobs=None) -> StudyResult:
    """Self-convergence of the full scheme under factor-2 refinement.

    The largest step on each level is ``dt_max * (h / h_coarsest)**dt_exponent``
    (``dt_exponent=2`` isolates the spatial error of the diffusion part).  The
    observed order is ``log2(d_k / d_{k+1})`` with ``d_k`` the L2 distance
    between level ``k`` and the restriction of level ``k+1``.
    """
    h_list, specs = _level_specs(cfg, cfg.study.h_list if h_list is None else h_list)
    t_eval = cfg.study.t_eval if t_eval is None else t_eval
    items = []
    for h, spec in zip(h_list, specs):
        dt = replace(cfg.dt, dt_max=cfg.dt.dt_max * (h / h_list[0]) ** dt_exponent)
        items.append((replace(cfg, grid=spec, dt=dt, t_end=t_eval, monitor_every=t_eval), spec))
    outs = _map(_level_run, items, cfg.study.jobs if jobs is None else jobs)
    grids = [make_grid(s) for s in specs]
    diffs = []
    for k in range(len(grids) - 1):
        d = outs[k][0] - restrict(outs[k + 1][0], grids[k + 1], grids[k])
        diffs.append(float(np.sqrt(np.sum(d * d * grids[k].cell_volume))))
    orders = _observed_orders(diffs)
    rows = []
    for k, (h, (_, verdict)) in enumerate(zip(h_list, outs)):
        rows.append({
            "h": h,
            "cells": specs[k].cells[0],
            "diff_to_finer": diffs[k] if k < len(diffs) else math.nan,
            "order": orders[k] if k < len(orders) else math.nan,
            "verdict": verdict,
        })
    return StudyResult("mesh_convergence", ["h", "cells", "diff_to_finer", "order", "verdict"],
                       rows, _order_verdict(outs, diffs, orders, order_range), _echo(cfg),
                       notes={"orders": orders})


def _order_verdict(outs, diffs, orders, order_range):
    if any(v != "completed" for _, v in outs):
        return "fail"
    if any(b >= a for a, b in zip(diffs, diffs[1:])):
        return "inconclusive"
    lo, hi = order_range
    return "pass" if all(lo <= q <= hi for q in orders) else "fail"


def elliptic_convergence(kind="cartesian2d", cells_list=(32, 64, 128, 256), k=2,
                         opts=None) -> StudyResult:
    """Error of the Helmholtz solve against the manufactured solution ``cos(k pi x)``.

    Cartesian grids only: ``-v'' + v = (1 + k^2 pi^2) cos(k pi x)`` with
    Neumann data has that exact solution.
    """
    rows = []
    for n in cells_list:
        g = make_grid(GridSpec(kind, n))
        x = g.mesh()[0]
        exact = np.cos(k * np.pi * x)
        b = ScalarField((1.0 + (k * np.pi) ** 2) * exact, g.spec)
        v = elliptic.solve(b, g, 1.0, 1.0, opts)
        err = v.values - exact
        rows.append({"h": g.h[0], "cells": n,
                     "l2_error": float(np.sqrt(np.sum(err * err * g.cell_volume)))})
    errs = [r["l2_error"] for r in rows]
    orders = _observed_orders(errs)
    for r, q in zip(rows[1:], orders):
        r["order"] = q
    rows[0]["order"] = math.nan
    ok = all(1.8 <= q <= 2.2 for q in orders)
    return StudyResult("elliptic_convergence", ["h", "cells", "l2_error", "order"], rows,
                       "pass" if ok else "fail", notes={"orders": orders})
