"""IMEX time stepping for the flux-limited chemotaxis system.

One step treats diffusion implicitly and chemotaxis plus logistic growth
explicitly::

    b  = u + dt * (-div_upwind(chi u F(v)) + mu u (1 - u))
    u' = (I - dt Lap_h)^-1 b
    v' = (I - Lap_h)^-1 u'

Both solves are Helmholtz-Neumann problems with an M-matrix, so ``b >= 0``
implies ``u' >= 0``.  The time step keeps ``b >= 0`` for ``u >= 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import elliptic
from .elliptic import EllipticConvergenceError, EllipticOptions
from .flux import LimiterParams, chemotactic_flux, stencil_factor, upwind_face_flux
from .grid import FaceVectorField, Grid, ScalarField, face_difference, face_divergence

logger = logging.getLogger(__name__)

VERDICTS = ("completed", "blowup_abort", "dt_underflow", "solver_failure")


class StepFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    chi: float
    mu: float
    limiter: LimiterParams
    elliptic: EllipticOptions = field(default_factory=EllipticOptions)

    def __post_init__(self):
        # chi = 0 is allowed: it switches chemotaxis off for reference runs
        if not self.chi >= 0:
            raise ValueError(f"chi must be nonnegative, got {self.chi}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")


@dataclass(frozen=True)
class DtPolicy:
    dt_max: float = 1e-2
    safety: float = 0.9
    dt_min: float = 1e-12
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt_max):
            raise ValueError("need 0 < dt_min < dt_max")
        if not (0 < self.safety < 1):
            raise ValueError("safety must lie in (0, 1)")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")


@dataclass(frozen=True)
class SimState:
    """Solution at time ``t``.  ``v`` always solves the signal equation for ``u``.

    ``dt`` is the size of the step that produced this state (0 initially) and
    ``grad_energy`` the running sum of ``dt * ||grad_h u||^2``.
    """

    t: float
    u: ScalarField
    v: ScalarField
    step_count: int = 0
    dt: float = 0.0
    grad_energy: float = 0.0


def initial_state(u0: ScalarField, g: Grid, params: ModelParams) -> SimState:
    g.check(u0)
    v0 = elliptic.solve_v(u0, g, params.elliptic)
    return SimState(t=0.0, u=u0.copy(), v=v0)


def gradient_energy(u: np.ndarray, g: Grid) -> float:
    """Discrete ``||grad u||_2^2``: sum over faces of area * h * ((u_j - u_i)/h)^2."""
    total = 0.0
    for d, area, h in zip(face_difference(u, g), g.face_area, g.h):
        total += float(np.sum(area * h * d * d))
    return total


def _dt_from_flux(F: FaceVectorField, u: np.ndarray, params: ModelParams, g: Grid,
                  pol: DtPolicy) -> float:
    fmax = max(float(np.max(np.abs(c))) for c in F.components)
    advect = params.chi * fmax * stencil_factor(g)
    logistic = params.mu * max(float(u.max()) - 1.0, 0.0)
    # the rates add: a cell can lose mass to both at once
    dt = pol.safety * min(pol.dt_max, 1.0 / (advect + logistic + 1e-30))
    return max(dt, pol.dt_min)


def stable_dt(state: SimState, params: ModelParams, g: Grid, pol: DtPolicy) -> float:
    """Largest step keeping the explicit update nonnegative, times ``safety``.

    Returns ``pol.dt_min`` when the constraint drops below it; :func:`run`
    treats that as an underflow.
    """
    F, _ = chemotactic_flux(state.v, g, params.limiter)
    return _dt_from_flux(F, state.u.values, params, g, pol)


def _advance(state, params, g, dt, F):
    u = state.u.values
    phi = upwind_face_flux(u, F, params.chi, g)
    D = face_divergence(phi, g)
    b = u + dt * (params.mu * u * (1.0 - u) - D)
    if not np.all(np.isfinite(b)):
        raise StepFailure(f"non-finite explicit update at t={state.t}")
    u_new, _, _ = elliptic.pcg(b, g, 1.0, dt, params.elliptic, x0=u)
    v_new, _, _ = elliptic.pcg(u_new, g, 1.0, 1.0, params.elliptic, x0=state.v.values)
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise StepFailure(f"non-finite solution after step at t={state.t}")
    return SimState(
        t=state.t + dt,
        u=ScalarField(u_new, g.spec),
        v=ScalarField(v_new, g.spec),
        step_count=state.step_count + 1,
        dt=dt,
        grad_energy=state.grad_energy + dt * gradient_energy(u_new, g),
    )


def step(state: SimState, params: ModelParams, g: Grid, dt: float) -> SimState:
    """Advance by ``dt``; the input state is not modified.

    Raises
    ------
    EllipticConvergenceError
        If either implicit solve fails.
    StepFailure
        If the update produces NaN or Inf.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g.check(state.u)
    F, _ = chemotactic_flux(state.v, g, params.limiter)
    return _advance(state, params, g, dt, F)


def run(u0: ScalarField, params: ModelParams, g: Grid, pol: DtPolicy, t_end: float,
        monitor_every: float, sink=None, qlist=(1, 2, 4), step_hook=None):
    """Integrate from ``u0`` to ``t_end``.

    ``sink`` receives a :class:`~chemoflux.monitors.MonitorRecord` at t=0, at
    every multiple of ``monitor_every`` and at the final time (including an
    aborted one).  ``step_hook(prev, new)`` is called after every step.

    Returns ``(final_state, verdict)`` with verdict one of ``VERDICTS``.
    Step failures are reported through the verdict, never raised.
    """
    from .monitors import record

    if not t_end > 0:
        raise ValueError("t_end must be positive")
    g.check(u0)
    if not np.all(np.isfinite(u0.values)):
        raise ValueError("u0 must be finite")

    emitted = [-1]

    def emit(s):
        if sink is not None and s.step_count != emitted[0]:
            sink(record(s, g, qlist))
        emitted[0] = s.step_count

    try:
        state = initial_state(u0, g, params)
    except EllipticConvergenceError as exc:
        logger.error("initial signal solve failed: %s", exc)
        return SimState(0.0, u0.copy(), u0.copy()), "solver_failure"
    emit(state)

    every = monitor_every if monitor_every and monitor_every > 0 else t_end
    k = 1
    t_next = min(k * every, t_end)
    verdict = "completed"
    if float(state.u.values.max()) >= pol.blowup_threshold:
        verdict = "blowup_abort"
    while verdict == "completed" and state.t < t_end:
        try:
            F, _ = chemotactic_flux(state.v, g, params.limiter)
            dt = _dt_from_flux(F, state.u.values, params, g, pol)
            if dt <= pol.dt_min:
                verdict = "dt_underflow"
                break
            hit = dt >= t_next - state.t
            if hit:
                dt = t_next - state.t
            new = _advance(state, params, g, dt, F)
        except (EllipticConvergenceError, StepFailure, FloatingPointError) as exc:
            logger.error("step %d failed: %s", state.step_count + 1, exc)
            verdict = "solver_failure"
            break
        if hit:
            new = replace(new, t=t_next)
        if step_hook is not None:
            step_hook(state, new)
        state = new
        if float(state.u.values.max()) >= pol.blowup_threshold:
            verdict = "blowup_abort"
            break
        if hit:
            emit(state)
            k += 1
            t_next = min(k * every, t_end)
    emit(state)
    logger.info("run ended at t=%.6g after %d steps: %s", state.t, state.step_count, verdict)
    return state, verdict
