"""Method-of-lines integration of the delayed porous-elastic system.

Space: second-order central differences with implicit Dirichlet zeros.
Delay: either the transport field z(x, y, t) = phi_t(x, t - tau*y), discretised
by first-order upwinding in y with inflow z(., 0) = psi, or (oracle path) a
ring buffer of past psi values.
Time: classical RK4 with a CFL-limited fixed step.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from .model import (COMPAT_TOL, ForcingSpec, InitialData, PhysicalParams,
                    compatibility_gap, forcing_eval)
from .scenario import Scenario
from .state import GridSpec, SimState, StateDerivative, Trajectory, d1, d2

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e12


class SolverError(RuntimeError):
    pass


class BlowUpError(SolverError):
    """Raised when the state leaves the finite range; carries the partial run."""

    def __init__(self, t: float, trajectory: Trajectory | None = None):
        super().__init__(f"blow-up detected at t={t:.6g}")
        self.t = t
        self.trajectory = trajectory


# ---------------------------------------------------------------------------
# initial data


def sample_initial_data(d: InitialData, g: GridSpec, tau: float, warnings: list | None = None) -> SimState:
    """Sample (u0, u1, phi0, phi1) at interior nodes and z(x_i, y_j, 0) = f0(x_i, -tau*y_j)."""
    x = g.x
    arrays = {}
    for name in ("u0", "u1", "phi0", "phi1"):
        a = np.asarray(getattr(d, name)(x), dtype=float) * np.ones_like(x)
        _require_finite(a, name, x)
        arrays[name] = a
    X, Y = np.meshgrid(x, g.y, indexing="ij")
    z = np.asarray(d.f0(X, -tau * Y), dtype=float) * np.ones_like(X)
    bad = ~np.isfinite(z)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise SolverError(f"history f0 not finite at node x={x[i]:.6g}, y={g.y[j]:.6g}")
    gap = compatibility_gap(d, x)
    if gap > COMPAT_TOL and warnings is not None:
        warnings.append(f"history incompatible with phi1: max|f0(x,0)-phi1(x)| = {gap:.3e}")
    z[:, 0] = arrays["phi1"]
    return SimState(0.0, arrays["u0"], arrays["u1"], arrays["phi0"], arrays["phi1"], z)


def _require_finite(a, name, x):
    bad = ~np.isfinite(a)
    if bad.any():
        raise SolverError(f"initial data {name} not finite at node x={x[np.argmax(bad)]:.6g}")


# ---------------------------------------------------------------------------
# right-hand side


def upwind_rates(zi: np.ndarray, inflow: np.ndarray, cz: float) -> np.ndarray:
    """-(1/tau) D_y z for the stored rows y_1..y_{M-1} (leading axis), inflow at y_0."""
    upstream = np.empty_like(zi)
    upstream[0] = inflow
    upstream[1:] = zi[:-1]
    return -cz * (zi - upstream)


class _System:
    """Precomputed coefficients and the flat right-hand side."""

    def __init__(self, p: PhysicalParams, f: ForcingSpec, g: GridSpec):
        self.p, self.f, self.g = p, f, g
        self.n = g.N
        self.linear = f.is_linear
        self.cu = p.mu / p.rho
        self.cuphi = p.b / p.rho
        self.cphi = p.delta / p.J
        self.cphiu = p.b / p.J
        self.cxi = p.xi / p.J
        self.c1 = p.mu1 / p.J
        self.c2 = p.mu2 / p.J
        self.cz = 1.0 / (p.tau * g.dy)

    def wave_rows(self, y, out, delayed):
        """Rows for (u, v, phi, psi) given the delayed psi value."""
        n, h = self.n, self.g.h
        u, v, phi, psi = y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:4 * n]
        out[:n] = v
        out[n:2 * n] = self.cu * d2(u, h) + self.cuphi * d1(phi, h)
        out[2 * n:3 * n] = psi
        dpsi = (self.cphi * d2(phi, h) - self.cphiu * d1(u, h) - self.cxi * phi
                - self.c1 * psi - self.c2 * delayed)
        if not self.linear:
            dpsi -= forcing_eval(self.f, phi) / self.p.J
        out[3 * n:4 * n] = dpsi

    def __call__(self, y):
        n, M = self.n, self.g.M
        out = np.empty_like(y)
        zi = y[4 * n:].reshape(M - 1, n)
        self.wave_rows(y, out, zi[-1])
        out[4 * n:] = upwind_rates(zi, y[3 * n:4 * n], self.cz).ravel()
        return out


def rhs(s: SimState, p: PhysicalParams, f: ForcingSpec, g: GridSpec) -> StateDerivative:
    """Time derivative of the semi-discrete system at state ``s``."""
    sys_ = _System(p, f, g)
    out = sys_(s.pack())
    bad = ~np.isfinite(out)
    if bad.any():
        raise SolverError(f"non-finite derivative at flat index {int(np.argmax(bad))}")
    dstate = SimState.unpack(out, g, s.t)
    return StateDerivative(dstate.u, dstate.v, dstate.phi, dstate.psi, dstate.z)


def stable_dt(g: GridSpec, p: PhysicalParams, cfl: float) -> float:
    if not 0 < cfl:
        raise SolverError("cfl must be positive")
    return cfl * min(g.h / math.sqrt(p.mu / p.rho), g.h / math.sqrt(p.delta / p.J), p.tau * g.dy)


def _rk4(fun, y, dt):
    k1 = fun(y)
    k2 = fun(y + 0.5 * dt * k1)
    k3 = fun(y + 0.5 * dt * k2)
    k4 = fun(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _blown_up(y) -> bool:
    m = np.max(np.abs(y))
    return not (m <= BLOWUP_THRESHOLD)  # also catches NaN


def step_rk4(s: SimState, dt: float, p: PhysicalParams, f: ForcingSpec, g: GridSpec) -> SimState:
    """One RK4 step. z(., 0) = psi and the Dirichlet zeros hold by construction."""
    y = _rk4(_System(p, f, g), s.pack(), dt)
    if _blown_up(y):
        raise BlowUpError(s.t + dt)
    return SimState.unpack(y, g, s.t + dt)


# ---------------------------------------------------------------------------
# full runs


@dataclass(frozen=True)
class StepPlan:
    dt: float
    n_steps: int


def plan_steps(sc: Scenario, dt: float | None = None) -> StepPlan:
    """Fixed step count reaching t_end; the CFL step is shrunk to land on t_end."""
    dt = dt if dt is not None else sc.time.dt
    if dt is None:
        dmax = stable_dt(sc.grid, sc.params, sc.time.cfl)
        n = max(1, math.ceil(sc.time.t_end / dmax - 1e-9))
        return StepPlan(sc.time.t_end / n, n)
    if not dt > 0:
        raise SolverError("dt must be positive")
    return StepPlan(dt, max(1, math.ceil(sc.time.t_end / dt - 1e-9)))


def commensurate_dt(tau: float, dt_max: float) -> float:
    """Largest dt <= dt_max with tau/dt an integer."""
    return tau / math.ceil(tau / dt_max - 1e-12)


def _wave_row(s: SimState, sc: Scenario, cfg) -> dict:
    eb = dg.energy(s, sc.params, sc.forcing, cfg)
    h = sc.grid.h
    return {"E_wave": eb.total - eb.delay_channel, "normsq_u_t": dg.normsq(s.v, h),
            "normsq_phi_t": dg.normsq(s.psi, h), "normsq_z1": dg.normsq(s.z[:, -1], h)}


class _Recorder:
    def __init__(self, sc: Scenario, lcfg, keep_states, state_every, row=None):
        self.sc = sc
        self.cfg = dg.DiagnosticsConfig()
        self.lcfg = lcfg
        self.row = row or (lambda s: dg.sample_diagnostics(s, sc.params, sc.forcing, self.cfg, lcfg))
        self.keep_states = keep_states
        self.state_every = state_every
        self.times: list[float] = []
        self.rows: list[dict] = []
        self.states: list[SimState] = []

    def __call__(self, s: SimState, k: int):
        self.times.append(s.t)
        self.rows.append(self.row(s))
        if self.keep_states and (k // self.sc.time.out_every) % self.state_every == 0:
            self.states.append(s.copy())

    def trajectory(self, metadata) -> Trajectory:
        cols = self.rows[0].keys() if self.rows else dg.DIAGNOSTIC_COLUMNS
        series = {c: np.array([r[c] for r in self.rows]) for c in cols}
        return Trajectory(np.array(self.times), series, self.states, metadata)


def _metadata(sc: Scenario, plan: StepPlan, kind: str) -> dict:
    g = sc.grid
    return {"kind": kind, "scenario_hash": sc.content_hash, "params_hash": sc.params.content_hash(),
            "N": g.N, "M": g.M, "h": g.h, "dy": g.dy, "dt": plan.dt, "n_steps": plan.n_steps,
            "out_every": sc.time.out_every, "warnings": [], "incomplete": False}


def _lyapunov_setting(lyap, sc: Scenario, s0: SimState):
    if lyap == "auto":
        E0 = dg.energy(s0, sc.params, sc.forcing).total
        return dg.lyapunov_config_for_run(sc.params, sc.forcing, dg.DiagnosticsConfig(), E0)
    return lyap


def run(sc: Scenario, dt: float | None = None, keep_states: bool = False, state_every: int = 1,
        lyapunov="auto", progress: bool = False) -> Trajectory:
    """Integrate the transformed (z-transport) system to t_end.

    Diagnostics are sampled every ``out_every`` steps. On blow-up a
    :class:`BlowUpError` carrying the partial trajectory is raised; a
    KeyboardInterrupt returns the partial trajectory flagged ``incomplete``.
    """
    plan = plan_steps(sc, dt)
    md = _metadata(sc, plan, "transport")
    g, p, f = sc.grid, sc.params, sc.forcing
    s0 = sample_initial_data(sc.initial, g, p.tau, md["warnings"])
    md["lyapunov"] = lcfg = _lyapunov_setting(lyapunov, sc, s0)
    rec = _Recorder(sc, lcfg, keep_states, state_every)
    rec(s0, 0)
    system = _System(p, f, g)
    y = s0.pack()
    out_every = sc.time.out_every
    t_wall = _time.monotonic()
    try:
        for k in range(1, plan.n_steps + 1):
            y = _rk4(system, y, plan.dt)
            if _blown_up(y):
                md["incomplete"] = True
                md["warnings"].append(f"blow-up at t={k * plan.dt:.6g}")
                raise BlowUpError(k * plan.dt, rec.trajectory(md))
            if k % out_every == 0 or k == plan.n_steps:
                rec(SimState.unpack(y, g, k * plan.dt), k)
            if progress and _time.monotonic() - t_wall > 5.0:
                t_wall = _time.monotonic()
                log.info("t = %.4g / %.4g", k * plan.dt, sc.time.t_end)
    except KeyboardInterrupt:
        md["incomplete"] = True
        md["warnings"].append("interrupted")
    md["final_state"] = SimState.unpack(y, g, rec.times[-1]) if not md["incomplete"] else None
    return rec.trajectory(md)


def history_buffer_reference_run(sc: Scenario, dt: float | None = None, keep_states: bool = False,
                                 state_every: int = 1) -> Trajectory:
    """Integrate the un-transformed delayed system with a ring buffer of psi.

    Requires tau = K*dt. RK4 is applied to the method-of-steps chain, so the
    delayed argument of stage c of step n is the stage-c value of psi from
    step n-K, stored in the buffer (no interpolation). Before t = tau the
    history f0 is evaluated at the exact stage times.
    """
    plan = plan_steps(sc, dt)
    p, f, g = sc.params, sc.forcing, sc.grid
    K = p.tau / plan.dt
    if abs(K - round(K)) > 1e-9 * max(1.0, K):
        raise SolverError(f"dt={plan.dt:.6g} does not divide tau={p.tau:.6g}; "
                          f"use dt = {commensurate_dt(p.tau, plan.dt):.12g}")
    K = int(round(K))
    md = _metadata(sc, plan, "history_buffer")
    s0 = sample_initial_data(sc.initial, g, p.tau, md["warnings"])
    rec = _Recorder(sc, None, keep_states, state_every,
                    row=lambda s: _wave_row(s, sc, dg.DiagnosticsConfig()))
    n = g.N
    x = g.x
    system = _System(p, f, g)
    buf = np.zeros((K, 4, n))
    y = s0.pack()[:4 * n]
    stage_c = (0.0, 0.5, 0.5, 1.0)
    dt = plan.dt

    def fun(yy, delayed):
        out = np.empty_like(yy)
        system.wave_rows(yy, out, delayed)
        return out

    def as_state(yy, t, delayed_now):
        # z is not an unknown here; only z(., 0) = psi and z(., 1) = psi(t - tau)
        # are filled, so the recorded series cover the wave part only
        z = np.zeros((n, g.M))
        z[:, 0] = yy[3 * n:]
        z[:, -1] = delayed_now
        return SimState(t, yy[:n].copy(), yy[n:2 * n].copy(), yy[2 * n:3 * n].copy(), yy[3 * n:].copy(), z)

    def delayed_values(k):
        if k >= K:
            return buf[k % K]
        t = k * dt
        return np.stack([sc.initial.f0(x, np.full_like(x, t + c * dt - p.tau)) for c in stage_c])

    rec(as_state(y, 0.0, delayed_values(0)[0]), 0)
    try:
        for k in range(plan.n_steps):
            dl = delayed_values(k).copy()
            k1 = fun(y, dl[0])
            y2 = y + 0.5 * dt * k1
            k2 = fun(y2, dl[1])
            y3 = y + 0.5 * dt * k2
            k3 = fun(y3, dl[2])
            y4 = y + dt * k3
            k4 = fun(y4, dl[3])
            buf[k % K] = np.stack([y[3 * n:], y2[3 * n:], y3[3 * n:], y4[3 * n:]])
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if _blown_up(y):
                md["incomplete"] = True
                raise BlowUpError((k + 1) * dt, rec.trajectory(md))
            if (k + 1) % sc.time.out_every == 0 or k + 1 == plan.n_steps:
                rec(as_state(y, (k + 1) * dt, delayed_values(k + 1)[0]), k + 1)
    except KeyboardInterrupt:
        md["incomplete"] = True
    return rec.trajectory(md)


def transport_only_run(inflow, M: int, tau: float, dt: float, t_end: float) -> np.ndarray:
    """Delay channel alone: psi is frozen to the scalar signal ``inflow(t)``.

    Starts from z(y, 0) = inflow(-tau*y) and returns z at y_0..y_{M-1} at
    t_end, for comparison with inflow(t_end - tau*y).
    """
    dy = 1.0 / (M - 1)
    cz = 1.0 / (tau * dy)
    y = np.arange(M) * dy
    zi = inflow(-tau * y[1:])
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / n_steps
    for k in range(n_steps):
        t = k * dt
        k1 = upwind_rates(zi, inflow(t), cz)
        k2 = upwind_rates(zi + 0.5 * dt * k1, inflow(t + 0.5 * dt), cz)
        k3 = upwind_rates(zi + 0.5 * dt * k2, inflow(t + 0.5 * dt), cz)
        k4 = upwind_rates(zi + dt * k3, inflow(t + dt), cz)
        zi = zi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.concatenate([[inflow(t_end)], zi])
