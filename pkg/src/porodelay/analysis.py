"""Decay-rate fits, refinement studies and parameter sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import diagnostics as dg
from . import model
from . import solver
from . import spectral
from .scenario import Scenario, apply_overrides, from_document

FLOOR_REL = 1e-14
MIN_FIT_SAMPLES = 10


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFit:
    """E(t) ≈ C·exp(-gamma·t) on ``window``."""

    gamma: float
    C: float
    r2: float
    window: tuple[float, float]
    n_used: int = 0


def default_window(t_end: float) -> tuple[float, float]:
    return (0.25 * t_end, 0.75 * t_end)


def fit_decay_rate(t, E, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line through (t, ln E) over the window.

    Samples at or below 1e-14·E(0) are dropped so the logarithm stays meaningful.
    A constant series has no explained variance and is reported with r2 = 0.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if t.shape != E.shape or t.ndim != 1 or t.size == 0:
        raise AnalysisError("t and E must be 1-D arrays of equal length")
    window = tuple(window) if window is not None else default_window(float(t[-1]))
    t0, t1 = window
    if not t0 < t1:
        raise AnalysisError(f"window must satisfy t0 < t1, got {window}")
    floor = FLOOR_REL * E[0]
    in_win = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    usable = in_win & (E > floor) & np.isfinite(E)
    if in_win.any() and not usable.any():
        raise AnalysisError("energy already at floor")
    n = int(usable.sum())
    if n < MIN_FIT_SAMPLES:
        raise AnalysisError(f"need at least {MIN_FIT_SAMPLES} usable samples in {window}, have {n}")
    ts, lnE = t[usable], np.log(E[usable])
    if np.ptp(lnE) == 0.0:
        return DecayFit(0.0, float(E[usable][0]), 0.0, window, n)
    res = scipy.stats.linregress(ts, lnE)
    return DecayFit(float(-res.slope), float(math.exp(res.intercept)), float(res.rvalue ** 2), window, n)


# ---------------------------------------------------------------------------
# refinement studies


@dataclass
class ConvergenceResult:
    """Successive differences between refinement levels and the orders they imply."""

    levels: list
    errors: list[float]
    orders: list[float]
    status: str  # "ok", "pre-asymptotic" or "exact"
    label: str = ""

    @property
    def order(self) -> float:
        """Order from the finest pair (nan when exact)."""
        return self.orders[-1] if self.orders else math.nan


def _orders(errors: list[float]) -> tuple[list[float], str]:
    errs = np.asarray(errors)
    if np.all(errs == 0.0):
        return [], "exact"
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = [float(np.log2(a / b)) for a, b in zip(errs[:-1], errs[1:])]
    status = "ok" if np.all(np.diff(errs) < 0) else "pre-asymptotic"
    return orders, status


def _l2(a: np.ndarray, h: float) -> float:
    return float(math.sqrt(h * float(np.sum(a * a))))


def _final_phi(sc: Scenario, dt: float | None) -> np.ndarray:
    traj = solver.run(sc, dt=dt, lyapunov=None)
    return traj.metadata["final_state"].phi


def convergence_study(sc: Scenario, levels, field_name: str = "phi") -> ConvergenceResult:
    """Spatial order from successive L² differences of phi(., t_end).

    ``levels`` are (N, M, dt) triples with h = 1/(N+1) halving from one level
    to the next; dt may be None for the CFL step. Finer fields are restricted
    to the coarse nodes (every other node) before differencing.
    """
    levels = [tuple(lv) for lv in levels]
    if len(levels) < 3:
        raise AnalysisError("convergence study needs at least 3 levels")
    for (Na, _, _), (Nb, _, _) in zip(levels[:-1], levels[1:]):
        if Nb + 1 != 2 * (Na + 1):
            raise AnalysisError(f"levels must halve h = 1/(N+1): N={Na} -> N={Nb}")
    fields = []
    for N, M, dt in levels:
        s = sc.with_overrides(**{"grid.N": N, "grid.M": M})
        traj = solver.run(s, dt=dt, lyapunov=None)
        fields.append(getattr(traj.metadata["final_state"], field_name))
    errors = []
    for (N, _, _), coarse, fine in zip(levels[:-1], fields[:-1], fields[1:]):
        errors.append(_l2(coarse - fine[1::2], 1.0 / (N + 1)))
    orders, status = _orders(errors)
    return ConvergenceResult(levels, errors, orders, status, "space")


def temporal_convergence(sc: Scenario, dts) -> ConvergenceResult:
    """Temporal order from successive differences of the full final state.

    ``dts`` must halve from one entry to the next and each must divide t_end.
    """
    dts = [float(d) for d in dts]
    if len(dts) < 3:
        raise AnalysisError("temporal study needs at least 3 step sizes")
    for a, b in zip(dts[:-1], dts[1:]):
        if not math.isclose(a, 2.0 * b, rel_tol=1e-12):
            raise AnalysisError("step sizes must halve between levels")
    h = sc.grid.h
    finals = [solver.run(sc, dt=dt, lyapunov=None).metadata["final_state"].pack() for dt in dts]
    errors = [_l2(a - b, h) for a, b in zip(finals[:-1], finals[1:])]
    orders, status = _orders(errors)
    return ConvergenceResult(dts, errors, orders, status, "time")


def _default_signal(t):
    return np.sin(2.0 * np.pi * t) + 0.5 * np.cos(3.0 * t)


def transport_convergence(Ms=(21, 41, 81, 161), tau: float = 1.0, t_end: float = 2.0,
                          signal=_default_signal, courant: float = 0.1) -> ConvergenceResult:
    """Upwind delay channel with frozen inflow against the exact z = g(t - tau*y).

    dt = courant·tau·dy on each level keeps the RK4 error far below the
    first-order upwind error.
    """
    errors = []
    for M in Ms:
        dy = 1.0 / (M - 1)
        z = solver.transport_only_run(signal, M, tau, courant * tau * dy, t_end)
        exact = signal(t_end - tau * np.arange(M) * dy)
        errors.append(_l2((z - exact)[1:], dy))
    orders, status = _orders(errors)
    return ConvergenceResult(list(Ms), errors, orders, status, "transport")


# ---------------------------------------------------------------------------
# spectra of runs


def linear_spectrum(sc: Scenario, N: int = 40, M: int = 11):
    """Eigenvalues of the linear generator for ``sc``'s parameters on an (N, M) grid."""
    g = solver.GridSpec(N, M)
    Gm = spectral.assemble_generator(g, sc.params)
    return Gm, spectral.spectrum(Gm)


def modal_energy_rates(sc: Scenario, N: int = 40, M: int = 11, rel_weight: float = 1e-6):
    """Spectral abscissa restricted to modes excited by the initial data.

    The initial state is expanded in eigenvectors of the generator; modes
    whose H-norm contribution is below ``rel_weight`` of the largest are
    treated as absent. Returns (excited abscissa, eigenvalues, weights).
    """
    s = sc.with_overrides(**{"grid.N": N, "grid.M": M})
    Gm = spectral.assemble_generator(s.grid, s.params)
    lam, V = np.linalg.eig(Gm.A)
    U0 = solver.sample_initial_data(s.initial, s.grid, s.params.tau).pack()
    coef = np.linalg.solve(V, U0)
    Wd = np.real(np.einsum("ik,ij,jk->k", V.conj(), Gm.Wh, V))
    weight = np.abs(coef) ** 2 * Wd
    excited = weight > rel_weight * weight.max() if weight.max() > 0 else np.zeros_like(weight, bool)
    sigma = float(np.max(lam.real[excited])) if excited.any() else -math.inf
    return sigma, lam, weight


def modal_energy_series(sc: Scenario, times, N: int = 40, M: int = 11) -> np.ndarray:
    """Linear energy ½‖e^{At}U0‖²_H from the eigen-decomposition of A."""
    s = sc.with_overrides(**{"grid.N": N, "grid.M": M})
    Gm = spectral.assemble_generator(s.grid, s.params)
    lam, V = np.linalg.eig(Gm.A)
    U0 = solver.sample_initial_data(s.initial, s.grid, s.params.tau).pack()
    coef = np.linalg.solve(V, U0)
    out = []
    for t in np.asarray(times, dtype=float):
        U = np.real(V @ (coef * np.exp(lam * t)))
        out.append(0.5 * float(U @ Gm.Wh @ U))
    return np.array(out)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("speed_defect", "mu2_ratio", "tau")


def designed_sweep_values(axis: str, n: int = 11) -> np.ndarray:
    if axis == "speed_defect":
        return np.linspace(-0.5, 0.5, n)
    if axis == "mu2_ratio":
        return np.linspace(1.0 / n, 1.0, n)
    if axis == "tau":
        return np.linspace(0.1, 5.0, n)
    raise AnalysisError(f"no designed sweep for axis {axis!r}")


def _apply_axis(doc: dict, axis: str, value: float) -> dict:
    pr = doc["params"]
    if axis == "speed_defect":
        # rho/mu - J/delta = value, achieved by moving delta
        denom = float(pr["rho"]) / float(pr["mu"]) - value
        if denom <= 0:
            raise AnalysisError(f"defect {value} not reachable by varying delta")
        return apply_overrides(doc, {"params.delta": float(pr["J"]) / denom})
    if axis == "mu2_ratio":
        return apply_overrides(doc, {"params.mu2": value * float(pr["mu1"])})
    if "." not in axis:
        axis = "params." + axis
    return apply_overrides(doc, {axis: value})


@dataclass
class SweepRow:
    axis: str
    value: float
    gamma_fit: float = math.nan
    r2: float = math.nan
    abscissa: float = math.nan
    CE: float = math.nan
    violations: int = -1
    equal_speed: bool = False
    speed_defect: float = math.nan
    degenerate: bool = False
    skipped: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("axis", "value", "gamma_fit", "r2", "abscissa", "CE",
                                           "violations", "equal_speed", "speed_defect", "degenerate",
                                           "skipped")}
        return d


def _sweep_row(doc: dict, axis: str, value: float, spectral_grid, window) -> SweepRow:
    row = SweepRow(axis, float(value))
    try:
        sc = from_document(_apply_axis(doc, axis, float(value)))
    except (AnalysisError, model.ModelError) as exc:
        row.skipped = str(exc)
        return row
    p = sc.params
    rep = model.validate_params(p)
    row.equal_speed = rep.equal_speed
    row.speed_defect = rep.speed_defect
    row.CE = model.energy_decay_constant(p)
    row.degenerate = row.CE <= 0.0
    if not rep.admissible:
        row.skipped = "; ".join(rep.violations)
        return row
    traj = solver.run(sc, lyapunov=None)
    E = traj.series["E"]
    try:
        fit = fit_decay_rate(traj.times, E, window)
        row.gamma_fit, row.r2 = fit.gamma, fit.r2
    except AnalysisError as exc:
        row.extra["fit_error"] = str(exc)
    if not row.degenerate:
        row.violations = int(dg.dissipation_check(traj, p).violations)
    if spectral_grid is not None:
        _, eigs = linear_spectrum(sc, *spectral_grid)
        row.abscissa = spectral.spectral_abscissa(eigs)
    return row


def sweep(base: Scenario, axis: str, values, workers: int = 1,
          spectral_grid: tuple[int, int] | None = (40, 11), window=None) -> list[SweepRow]:
    """One row per value; inadmissible values give rows marked ``skipped``.

    Rows come back in input order regardless of ``workers``.
    """
    values = [float(v) for v in values]
    doc = base.document
    if workers <= 1:
        return [_sweep_row(doc, axis, v, spectral_grid, window) for v in values]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_sweep_row, doc, axis, v, spectral_grid, window) for v in values]
        return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# run summaries


def _nanmax(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.nanmax(a)) if a.size and not np.all(np.isnan(a)) else math.nan


def run_summary(traj, sc: Scenario) -> dict:
    """Machine-readable digest of one run (written as the JSON summary)."""
    E = traj.series["E"] if "E" in traj.series else traj.series["E_wave"]
    out = {"E0": float(E[0]), "Efinal": float(E[-1]), "gamma_fit": math.nan, "r2": math.nan,
           "CE": model.energy_decay_constant(sc.params), "worst_dissipation_margin": math.nan,
           "gamma1_emp": math.nan, "gamma2_emp": math.nan, "w_boundary_residual_max": math.nan,
           "incomplete": bool(traj.metadata.get("incomplete")),
           "warnings": list(traj.metadata.get("warnings", []))}
    try:
        fit = fit_decay_rate(traj.times, E)
        out.update(gamma_fit=fit.gamma, r2=fit.r2)
    except AnalysisError as exc:
        out["fit_error"] = str(exc)
    if "normsq_z1" in traj.series and len(traj) >= 3:
        out["worst_dissipation_margin"] = dg.dissipation_check(traj, sc.params).worst_margin
    L = traj.series.get("L")
    if L is not None and np.isfinite(L).any():
        keep = (E > FLOOR_REL * E[0]) & np.isfinite(L)
        ratio = L[keep] / E[keep]
        if ratio.size:
            out.update(gamma1_emp=float(ratio.min()), gamma2_emp=float(ratio.max()))
    if "w_residual" in traj.series:
        out["w_boundary_residual_max"] = _nanmax(np.abs(traj.series["w_residual"]))
    return out
