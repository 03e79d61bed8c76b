"""Acceptance pipeline: one verdict per criterion, with the measured values.

Each ``check_*`` takes a scenario and returns a :class:`Verdict`. Runs that
several checks share (the out_every=1 reference run, the linear variant) are
cached on a :class:`Pipeline`.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from . import diagnostics as dg
from . import model
from . import solver
from . import spectral
from .scenario import Scenario

SPECTRAL_GRID = (40, 11)
SPACE_LEVELS = ((24, 11, 1e-3), (49, 11, 1e-3), (99, 11, 1e-3), (199, 11, 1e-3))
TIME_STEPS = (5e-3, 2.5e-3, 1.25e-3, 6.25e-4)
TRANSPORT_MS = (41, 81, 161, 321)


@dataclass
class Verdict:
    name: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""

    def line(self) -> str:
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.name} {'PASS' if self.passed else 'FAIL'}  {self.title}: {vals}{tail}"

    def as_dict(self) -> dict:
        return {"name": self.name, "title": self.title, "passed": self.passed,
                "measured": self.measured, "detail": self.detail}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


class Pipeline:
    """Caches the runs shared between checks for one scenario."""

    def __init__(self, sc: Scenario, seed: int | None = None):
        self.sc = sc
        self.seed = sc.seed if seed is None else seed

    @functools.cached_property
    def reference(self):
        sc = self.sc.with_overrides(**{"time.out_every": 1})
        return _timed(solver.run, sc, lyapunov=None)

    @functools.cached_property
    def linear(self) -> Scenario:
        return self.sc.with_overrides(**{"forcing.kind": "zero"})

    @functools.cached_property
    def generator(self):
        return spectral.assemble_generator(solver.GridSpec(*SPECTRAL_GRID), self.sc.params)


def hypothesis_gate(sc: Scenario) -> list[str]:
    """Violated hypotheses of the decay result; empty when the pipeline may run."""
    rep = model.validate_params(sc.params)
    bad = list(rep.violations)
    if rep.admissible and not model.energy_decay_constant(sc.params) > 0:
        bad.append("C_E > 0 (needs μ₂ < μ₁ and η strictly inside the window)")
    return bad


def check_a1(pl: Pipeline) -> Verdict:
    traj, secs = pl.reference
    E = traj.series["E"]
    rise = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    tol = 1e-8 * E[0]
    ok = rise <= tol and secs < 30.0
    return Verdict("A1", "energy monotone", ok,
                   {"max_rise_over_E0": rise / E[0] if E[0] > 0 else 0.0, "runtime_s": secs})


def check_a2(pl: Pipeline) -> Verdict:
    traj, _ = pl.reference
    rep = dg.dissipation_check(traj, pl.sc.params)
    ok = rep.CE > 0 and rep.violations == 0
    return Verdict("A2", "quantitative dissipation", ok,
                   {"CE": rep.CE, "eta": pl.sc.params.eta, "violations": rep.violations,
                    "worst_margin": rep.worst_margin, "tol_diss": rep.tol})


def check_a3(pl: Pipeline) -> Verdict:
    traj, secs = pl.reference
    fit = an.fit_decay_rate(traj.times, traj.series["E"])
    ok = fit.r2 >= 0.98 and fit.gamma > 0 and secs < 30.0
    return Verdict("A3", "exponential decay fit", ok,
                   {"gamma_fit": fit.gamma, "r2": fit.r2, "window": fit.window, "runtime_s": secs})


def check_a4(pl: Pipeline, t_max: float = 10.0, thin: int = 10) -> Verdict:
    sc = pl.linear.with_overrides(**{"time.t_end": min(t_max, pl.sc.time.t_end), "time.out_every": 1})
    dt = solver.commensurate_dt(sc.params.tau, solver.stable_dt(sc.grid, sc.params, sc.time.cfl))
    a = solver.run(sc, dt=dt, keep_states=True, state_every=thin, lyapunov=None)
    b = solver.history_buffer_reference_run(sc, dt=dt, keep_states=True, state_every=thin)
    diff = max(float(np.max(np.abs(sa.phi - sb.phi))) for sa, sb in zip(a.states, b.states))
    bound = 10.0 * (sc.grid.h ** 2 + sc.grid.dy)
    return Verdict("A4", "transport vs history buffer", diff <= bound,
                   {"max_phi_diff": diff, "bound": bound, "dt": dt, "compared_states": len(a.states)})


def check_a5(pl: Pipeline) -> Verdict:
    t0 = time.perf_counter()
    sigma = spectral.spectral_abscissa(spectral.spectrum(pl.generator))
    sc = pl.linear.with_overrides(**{"grid.N": SPECTRAL_GRID[0], "grid.M": SPECTRAL_GRID[1]})
    traj = solver.run(sc, lyapunov=None)
    fit = an.fit_decay_rate(traj.times, traj.series["E"])
    secs = time.perf_counter() - t0
    target = 2.0 * abs(sigma)
    rel = abs(fit.gamma - target) / target if target > 0 else math.inf
    ok = sigma < 0 and rel <= 0.25 and secs < 60.0
    excited, _, _ = an.modal_energy_rates(sc, *SPECTRAL_GRID)
    return Verdict("A5", "spectral consistency", ok,
                   {"abscissa": sigma, "gamma_fit": fit.gamma, "two_abs_sigma": target,
                    "rel_gap": rel, "excited_abscissa": excited, "runtime_s": secs})


def check_a6(pl: Pipeline) -> Verdict:
    Gm = pl.generator
    worst = spectral.dissipativity_check(Gm, trials=1000, seed=pl.seed)
    n = Gm.grid.N
    U = np.zeros(Gm.dim)
    U[n:2 * n] = np.random.default_rng(pl.seed).standard_normal(n)
    v_only = spectral.rayleigh_quotient(Gm, U)
    ok = worst <= 1e-6 and abs(v_only) <= 1e-12
    return Verdict("A6", "discrete dissipativity", ok, {"max_quotient": worst, "v_only_quotient": v_only})


def check_a7(pl: Pipeline) -> Verdict:
    sc = pl.linear.with_overrides(**{"time.out_every": 1})
    traj = solver.run(sc)
    lcfg = traj.metadata["lyapunov"]
    if lcfg is None:
        return Verdict("A7", "Lyapunov equivalence", False, {}, "decay hypotheses not met")
    E, L = traj.series["E"], traj.series["L"]
    keep = E > an.FLOOR_REL * E[0]
    ratio = L[keep] / E[keep]
    g1, g2 = float(np.min(ratio)), float(np.max(ratio))
    md = traj.metadata
    tol = dg.dissipation_tolerance(md["h"], md["dy"], md["dt"], E[0])
    dL = float(np.max(np.diff(L) / np.diff(traj.times)))
    ok = g1 > 0 and dL <= tol
    return Verdict("A7", "Lyapunov equivalence", ok,
                   {"gamma1": g1, "gamma2": g2, "max_dL_dt": dL, "tol_diss": tol, "M": lcfg.Mw})


def check_a8(pl: Pipeline) -> Verdict:
    t0 = time.perf_counter()
    short = pl.linear.with_overrides(**{"time.t_end": 2.0})
    space = an.convergence_study(short, SPACE_LEVELS)
    temporal = an.temporal_convergence(short.with_overrides(**{"grid.N": 40, "grid.M": 11}), TIME_STEPS)
    transport = an.transport_convergence(TRANSPORT_MS)
    secs = time.perf_counter() - t0
    ok = (1.8 <= space.order <= 2.2 and temporal.order >= 3.8
          and 0.85 <= transport.order <= 1.15 and secs < 180.0)
    return Verdict("A8", "convergence orders", ok,
                   {"space": space.order, "time": temporal.order, "transport": transport.order,
                    "runtime_s": secs})


def check_a9(pl: Pipeline, workers: int = 1) -> tuple[Verdict, list]:
    rows = an.sweep(pl.sc, "speed_defect", an.designed_sweep_values("speed_defect", 11), workers=workers)
    live = [r for r in rows if not r.skipped]
    bad = [r.value for r in live if not (r.r2 >= 0.9)]
    defects = [r.value for r in rows]
    ok = len(rows) == 11 and not bad and bool(np.all(np.diff(defects) > 0))
    min_r2 = min((r.r2 for r in live), default=math.nan)
    return Verdict("A9", "equal-speed sweep", ok,
                   {"rows": len(rows), "admissible": len(live), "min_r2": min_r2,
                    "rows_below_0.9": bad}), rows


CHECKS = {"A1": check_a1, "A2": check_a2, "A3": check_a3, "A4": check_a4,
          "A5": check_a5, "A6": check_a6, "A7": check_a7}


def run_pipeline(sc: Scenario, names=tuple(CHECKS), seed: int | None = None) -> list[Verdict]:
    pl = Pipeline(sc, seed)
    return [CHECKS[n](pl) for n in names]
