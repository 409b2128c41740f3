"""Diagnostics along a trajectory and the invariant checks built on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import elliptic
from .flux import face_gradient_magnitude
from .grid import Grid, ScalarField, integrate, lq_norm

DEFAULT_QLIST = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    dt: float
    mass: float
    min_u: float
    max_u: float
    lq: tuple  # ((q, ||u||_{L^{2q}}), ...)
    grad_v_max: float
    grad_energy_cum: float
    elliptic_residual: float

    def as_row(self) -> list:
        return ([self.t, self.dt, self.mass, self.min_u, self.max_u]
                + [val for _, val in self.lq]
                + [self.grad_v_max, self.grad_energy_cum, self.elliptic_residual])


@dataclass
class InvariantResult:
    name: str
    passed: bool
    margin: float  # worst value of (observed - allowed); <= 0 means satisfied
    t_worst: float


@dataclass
class InvariantReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self):
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            yield f"{status} {r.name}: margin={r.margin:.3e} at t={r.t_worst:.6g}"


def record(state, g: Grid, qlist=DEFAULT_QLIST) -> MonitorRecord:
    """Diagnostics of ``state``; a pure function of its arguments."""
    u = state.u
    if any(q < 1 for q in qlist):
        raise ValueError("q entries must be >= 1")
    gmax = max(float(m.max()) for m in face_gradient_magnitude(state.v, g))
    return MonitorRecord(
        t=float(state.t),
        dt=float(state.dt),
        mass=integrate(u, g),
        min_u=float(u.values.min()),
        max_u=float(u.values.max()),
        lq=tuple((float(q), lq_norm(u, g, 2.0 * q)) for q in qlist),
        grad_v_max=gmax,
        grad_energy_cum=float(state.grad_energy),
        elliptic_residual=elliptic.residual(state.v, u, g),
    )


def check_mass_bound(series, m0: float, vol: float) -> InvariantResult:
    """Total mass never exceeds ``max(m0, |Omega|)`` (relative slack 1e-10)."""
    if not series:
        raise ValueError("empty series")
    bound = max(m0, vol) * (1.0 + 1e-10)
    worst = max(series, key=lambda r: r.mass)
    return InvariantResult("mass_bound", worst.mass <= bound, worst.mass - max(m0, vol), worst.t)


def check_nonnegativity(series) -> InvariantResult:
    if not series:
        raise ValueError("empty series")
    margins = [(-r.min_u - 1e-12 * max(1.0, r.max_u), r.t) for r in series]
    margin, t = max(margins)
    return InvariantResult("nonnegativity", margin <= 0.0, margin, t)


def check_elliptic_consistency(series, rel_tol: float) -> InvariantResult:
    worst = max(series, key=lambda r: r.elliptic_residual)
    return InvariantResult("elliptic_consistency", worst.elliptic_residual <= rel_tol,
                           worst.elliptic_residual - rel_tol, worst.t)


def check_grad_energy_monotone(series) -> InvariantResult:
    worst, t = 0.0, series[0].t
    for a, b in zip(series, series[1:]):
        drop = a.grad_energy_cum - b.grad_energy_cum
        if drop > worst:
            worst, t = drop, b.t
    return InvariantResult("grad_energy_monotone", worst <= 0.0, worst, t)


def boundedness_verdict(series, window_split: float = 0.5) -> str:
    """Compare the peak of ``max_u`` before and after ``window_split * T``.

    ``"bounded"`` if the late peak is within 5% of the early one, ``"growing"``
    if it at least doubles, ``"inconclusive"`` otherwise.
    """
    if not 0 < window_split < 1:
        raise ValueError("window_split must lie in (0, 1)")
    if len(series) < 10:
        raise ValueError(f"need at least 10 checkpoints, got {len(series)}")
    T = series[-1].t
    split = window_split * T
    early = max(r.max_u for r in series if r.t < split)
    late = max(r.max_u for r in series if r.t >= split)
    if late <= 1.05 * early:
        return "bounded"
    if late >= 2.0 * early:
        return "growing"
    return "inconclusive"


def linear_growth_fit(series, t_lo: float, t_hi: float):
    """Least-squares fit ``E(T) = c0 + c1 T + c2 T^2`` of ``grad_energy_cum``.

    Returns ``(c1, c2)``; the energy grows linearly when ``|c2|`` is small
    compared with ``|c1|``.
    """
    pts = [(r.t, r.grad_energy_cum) for r in series if t_lo <= r.t <= t_hi]
    if len(pts) < 3:
        raise ValueError("need at least 3 checkpoints in the fit window")
    t, e = np.array(pts).T
    c2, c1, _ = np.polyfit(t, e, 2)
    return float(c1), float(c2)


def linear_fit_residual(series, t_lo: float, t_hi: float):
    """Fit ``E(T) = a + c1 T`` to ``grad_energy_cum`` on ``[t_lo, t_hi]``.

    Returns ``(c1, a, rel)`` where ``rel`` is the least-squares residual of
    the line divided by the norm of the data about its mean.  The quadratic
    coefficient of :func:`linear_growth_fit` is a cruder view of the same
    thing.
    """
    pts = [(r.t, r.grad_energy_cum) for r in series if t_lo <= r.t <= t_hi]
    if len(pts) < 3:
        raise ValueError("need at least 3 checkpoints in the fit window")
    t, e = np.array(pts).T
    c1, a = np.polyfit(t, e, 1)
    spread = float(np.linalg.norm(e - e.mean()))
    resid = float(np.linalg.norm(e - (a + c1 * t)))
    rel = resid / spread if spread > 0 else 0.0
    return float(c1), float(a), rel


class StepAudit:
    """Per-step checks of the discrete mass balance and nonnegativity.

    Use as ``step_hook`` for :func:`chemoflux.integrator.run`.  For each step
    it compares the mass change with ``dt * mu * sum u (1 - u) vol`` and
    checks that mass above ``|Omega|`` does not increase.
    """

    def __init__(self, g: Grid, mu: float):
        self.g = g
        self.mu = mu
        self.steps = 0
        self.worst_identity = 0.0  # max |defect| / max(1, m)
        self.t_identity = 0.0
        self.worst_growth = 0.0  # max (m' / m - 1) over steps with m > |Omega|
        self.t_growth = 0.0
        self.worst_negative = 0.0  # max of -min u / max(1, max u)
        self.t_negative = 0.0

    def __call__(self, prev, new):
        vol = self.g.cell_volume
        u = prev.u.values
        m = float(np.sum(u * vol))
        m_new = float(np.sum(new.u.values * vol))
        source = new.dt * self.mu * float(np.sum(u * (1.0 - u) * vol))
        defect = abs(m_new - m - source) / max(1.0, m)
        self.steps += 1
        if defect > self.worst_identity:
            self.worst_identity, self.t_identity = defect, new.t
        if m > self.g.total_volume:
            growth = m_new / m - 1.0
            if growth > self.worst_growth:
                self.worst_growth, self.t_growth = growth, new.t
        neg = -float(new.u.values.min()) / max(1.0, float(new.u.values.max()))
        if neg > self.worst_negative:
            self.worst_negative, self.t_negative = neg, new.t

    def results(self, identity_tol=1e-11, growth_tol=1e-12, negative_tol=1e-12):
        return [
            InvariantResult("mass_ode_identity", self.worst_identity <= identity_tol,
                            self.worst_identity - identity_tol, self.t_identity),
            InvariantResult("mass_no_growth_above_volume", self.worst_growth <= growth_tol,
                            self.worst_growth - growth_tol, self.t_growth),
            InvariantResult("step_nonnegativity", self.worst_negative <= negative_tol,
                            self.worst_negative - negative_tol, self.t_negative),
        ]


def full_report(series, audit: StepAudit | None, m0: float, vol: float,
                rel_tol: float) -> InvariantReport:
    report = InvariantReport([
        check_mass_bound(series, m0, vol),
        check_nonnegativity(series),
        check_elliptic_consistency(series, rel_tol),
        check_grad_energy_monotone(series),
    ])
    if audit is not None:
        report.results.extend(audit.results())
    return report

