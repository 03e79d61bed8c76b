"""Energy, H-norm, dissipation and Lyapunov functionals on discrete states.

Quadrature conventions (shared with the generator's weight matrix):

* nodal x-integrals: composite trapezoid with the Dirichlet zeros, i.e. h*sum;
* gradient energies (delta*phi_x^2, mu*u_x^2): forward differences on the N+1
  cells, exact for the piecewise-linear interpolant;
* the coupling 2b*u_x*phi and the functionals I3, B1, B2: central differences
  at the nodes;
* y-integrals of z: ``midpoint`` treats column j >= 1 as the upwind cell
  (y_{j-1}, y_j]; ``trapezoid`` uses the nodes y_0..y_{M-1} with z(., 0) = psi.

With ``midpoint`` the semi-discrete energy obeys the dissipation identity
exactly, which is why it is the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.integrate import cumulative_simpson

from .model import (ForcingSpec, PhysicalParams, energy_decay_constant,
                    forcing_potential, validate_params)
from .state import GridSpec, SimState, Trajectory, d1, dcell

QUADRATURES = ("midpoint", "trapezoid")


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsConfig:
    cp: float = 1.0 / math.pi**2
    quadrature: str = "midpoint"

    def __post_init__(self):
        if not self.cp > 0:
            raise DiagnosticsError("Poincaré constant cp must be positive")
        if self.quadrature not in QUADRATURES:
            raise DiagnosticsError(f"quadrature must be one of {QUADRATURES}")


def grid_of(s: SimState) -> GridSpec:
    return GridSpec(s.N, s.M)


def xint(a: np.ndarray, h: float) -> float:
    return h * float(np.sum(a))


def grad_sq(a: np.ndarray, h: float) -> float:
    """∫ a_x² with cell differences."""
    return h * float(np.sum(dcell(a, h) ** 2))


def y_weights(g: GridSpec, cfg: DiagnosticsConfig, weight=None) -> np.ndarray:
    """Quadrature weights over the M columns of z for ∫_0^1 w(y) (.) dy."""
    dy = g.dy
    wts = np.full(g.M, dy)
    if cfg.quadrature == "midpoint":
        wts[0] = 0.0
        nodes = (np.arange(g.M) - 0.5) * dy
    else:
        wts[0] = wts[-1] = 0.5 * dy
        nodes = g.y
    if weight is not None:
        wts = wts * weight(np.clip(nodes, 0.0, 1.0))
    return wts


def z_integral(z: np.ndarray, g: GridSpec, cfg: DiagnosticsConfig, weight=None) -> float:
    """∫∫ w(y) z² dy dx."""
    return g.h * float(np.sum((z**2) @ y_weights(g, cfg, weight)))


def coupled_form(ux: np.ndarray, phi: np.ndarray, p: PhysicalParams) -> np.ndarray:
    """Pointwise mu*u_x² + 2b*u_x*phi + xi*phi²."""
    return p.mu * ux**2 + 2.0 * p.b * ux * phi + p.xi * phi**2


def completed_square(ux: np.ndarray, phi: np.ndarray, p: PhysicalParams) -> np.ndarray:
    """Same quadratic form written as (b/√ξ u_x + √ξ φ)² + (μ − b²/ξ) u_x²."""
    sq = p.b / math.sqrt(p.xi) * ux + math.sqrt(p.xi) * phi
    return sq**2 + (p.mu - p.b**2 / p.xi) * ux**2


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_u: float
    kinetic_phi: float
    porous_grad: float
    elastic_grad: float
    coupling: float
    porous_zero: float
    forcing_potential: float
    delay_channel: float

    @property
    def total(self) -> float:
        return sum(getattr(self, f.name) for f in fields(self))


def energy(s: SimState, p: PhysicalParams, f: ForcingSpec,
           cfg: DiagnosticsConfig = DiagnosticsConfig()) -> EnergyBreakdown:
    g = grid_of(s)
    h = g.h
    return EnergyBreakdown(
        kinetic_u=0.5 * p.rho * xint(s.v**2, h),
        kinetic_phi=0.5 * p.J * xint(s.psi**2, h),
        porous_grad=0.5 * p.delta * grad_sq(s.phi, h),
        elastic_grad=0.5 * p.mu * grad_sq(s.u, h),
        coupling=p.b * xint(d1(s.u, h) * s.phi, h),
        porous_zero=0.5 * p.xi * xint(s.phi**2, h),
        forcing_potential=xint(forcing_potential(f, s.phi), h),
        delay_channel=0.5 * p.eta * z_integral(s.z, g, cfg),
    )


def h_normsq(s: SimState, p: PhysicalParams, cfg: DiagnosticsConfig = DiagnosticsConfig()) -> float:
    """‖U‖²_H: twice the energy without the forcing potential."""
    e = energy(s, p, ForcingSpec.zero(), cfg)
    return 2.0 * e.total


def normsq(a: np.ndarray, h: float) -> float:
    return xint(a**2, h)


def poincare_ux_bound(s: SimState, p: PhysicalParams, cfg: DiagnosticsConfig = DiagnosticsConfig()):
    """Both sides of ∫u_x² ≤ (3ξ/b²)∫(b/√ξ u_x+√ξφ)² + (2ξ²cp/b²)∫φ_x².

    u_x is the nodal central difference, φ_x the cell difference.
    """
    h = grid_of(s).h
    ux = d1(s.u, h)
    sq = p.b / math.sqrt(p.xi) * ux + math.sqrt(p.xi) * s.phi
    lhs = normsq(ux, h)
    rhs = 3 * p.xi / p.b**2 * normsq(sq, h) + 2 * p.xi**2 * cfg.cp / p.b**2 * grad_sq(s.phi, h)
    return lhs, rhs


# ---------------------------------------------------------------------------
# dissipation


@dataclass(frozen=True)
class DissipationReport:
    CE: float
    tol: float
    worst_margin: float
    violations: int
    margins: np.ndarray

    @property
    def ok(self) -> bool:
        return self.violations == 0


def dissipation_tolerance(h: float, dy: float, dt: float, E0: float, c_tol: float = 10.0) -> float:
    return c_tol * (h * h + dy + dt**4) * abs(E0)


def dissipation_check(traj: Trajectory, p: PhysicalParams, cfg: DiagnosticsConfig = DiagnosticsConfig(),
                      c_tol: float = 10.0) -> DissipationReport:
    """Test ΔE/Δt ≤ −C_E(‖ψ‖² + ‖z(·,1)‖²) + tol on every sampled interval.

    The dissipation on an interval is the trapezoid average of its endpoints.
    A margin is ΔE/Δt + C_E·D; violations count margins above tol.
    """
    t = np.asarray(traj.times)
    if t.size < 3:
        raise DiagnosticsError("trajectory too short for a dissipation check (need >= 3 samples)")
    E = traj.series["E"]
    D = traj.series["normsq_phi_t"] + traj.series["normsq_z1"]
    CE = energy_decay_constant(p)
    md = traj.metadata
    tol = dissipation_tolerance(md["h"], md["dy"], md["dt"], E[0], c_tol)
    rate = np.diff(E) / np.diff(t)
    margins = rate + CE * 0.5 * (D[1:] + D[:-1])
    return DissipationReport(CE=CE, tol=tol, worst_margin=float(np.max(margins)),
                             violations=int(np.sum(margins > tol)), margins=margins)


# ---------------------------------------------------------------------------
# auxiliary elliptic problem and Lyapunov functionals


def solve_w(phi: np.ndarray, p: PhysicalParams, g: GridSpec):
    """w with −w_x = (b/μ)φ, w(0) = 0; returns interior w and |w(1)|.

    w(1) = 0 only when φ has zero mean, so the right end is reported rather
    than imposed. The running integral uses cumulative Simpson (fourth order).
    """
    full = np.zeros(g.N + 2)
    full[1:-1] = phi
    xs = np.linspace(0.0, 1.0, g.N + 2)
    w = -(p.b / p.mu) * cumulative_simpson(full, x=xs, initial=0.0)
    return w[1:-1], abs(float(w[-1]))


def q_weight(x: np.ndarray) -> np.ndarray:
    return 2.0 - 4.0 * x


def beta_of(p: PhysicalParams) -> float:
    return 1.0 / (3.0 * (p.mu * p.xi / p.b**2 - 1.0) + 1.0)


@dataclass(frozen=True)
class LyapunovConfig:
    Mw: float
    Nw: float
    eps: float
    lam2: float
    lam2t: float
    beta: float

    def scaled(self, **changes) -> "LyapunovConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return LyapunovConfig(**d)


@dataclass(frozen=True)
class LyapunovParts:
    I1: float
    I2: float
    I3: float
    I4: float
    B1: float
    B2: float
    w_residual: float


def lyapunov_components(s: SimState, p: PhysicalParams, f: ForcingSpec,
                        cfg: DiagnosticsConfig, lcfg: LyapunovConfig) -> LyapunovParts:
    g = grid_of(s)
    h = g.h
    x = g.x
    rx = math.sqrt(p.xi)
    ux, phix = d1(s.u, h), d1(s.phi, h)
    w, res = solve_w(s.phi, p, g)
    half_phi2 = 0.5 * p.mu1 * normsq(s.phi, h)
    I1 = -xint(p.rho * s.u * s.v + p.J * s.phi * s.psi, h) - half_phi2
    I2 = xint(p.J * s.psi * s.phi + p.rho * s.v * w, h) + half_phi2
    I3 = (p.J * xint((p.b / rx * ux + rx * s.phi) * s.psi, h)
          + p.b * p.J / rx * xint(phix * s.v, h))
    I4 = z_integral(s.z, g, cfg, weight=lambda y: np.exp(-2.0 * p.tau * y))
    q = q_weight(x)
    B1 = p.J * p.delta / (4.0 * lcfg.eps) * xint(q * s.psi * phix, h)
    B2 = p.rho * lcfg.eps / p.mu * xint(q * s.v * ux, h)
    return LyapunovParts(I1, I2, I3, I4, B1, B2, res)


def check_lyapunov_config(lcfg: LyapunovConfig, p: PhysicalParams,
                          cfg: DiagnosticsConfig = DiagnosticsConfig()) -> list[str]:
    """Names of the violated smallness conditions (empty when all hold)."""
    bad = []
    rx = math.sqrt(p.xi)
    beta = beta_of(p)
    if not math.isclose(lcfg.beta, beta, rel_tol=1e-12):
        bad.append("beta = [3(μξ/b²−1)+1]^-1")
    if not lcfg.lam2 < p.delta / p.mu2:
        bad.append("λ₂ < δ/μ₂")
    if not lcfg.eps <= _eps_cap(p, beta):
        bad.append("ε ≤ min{(√ξ/8)/(ξ/4+3ξ/μ+6ξ/b²), √ξμβ/64}")
    if not lcfg.lam2t < rx * beta / (32.0 * lcfg.Nw * cfg.cp):
        bad.append("λ̃₂ < √ξβ/(32Ncp)")
    return bad


def lyapunov(s: SimState, p: PhysicalParams, f: ForcingSpec, cfg: DiagnosticsConfig,
             lcfg: LyapunovConfig, E: float | None = None) -> float:
    bad = check_lyapunov_config(lcfg, p, cfg)
    if bad:
        raise DiagnosticsError("Lyapunov config violates: " + "; ".join(bad))
    parts = lyapunov_components(s, p, f, cfg, lcfg)
    if E is None:
        E = energy(s, p, f, cfg).total
    return combine_lyapunov(E, parts, p, lcfg)


def combine_lyapunov(E: float, parts: LyapunovParts, p: PhysicalParams, lcfg: LyapunovConfig) -> float:
    return (lcfg.Mw * E + math.sqrt(p.xi) / 8.0 * lcfg.beta * parts.I1 + lcfg.Nw * parts.I2
            + parts.I3 + parts.B1 + parts.B2 + parts.I4)


def _eps_cap(p: PhysicalParams, beta: float) -> float:
    rx = math.sqrt(p.xi)
    cap1 = (rx / 8.0) / (p.xi / 4.0 + 3.0 * p.xi / p.mu + 6.0 * p.xi / p.b**2)
    cap2 = rx * p.mu * beta / 64.0
    return min(cap1, cap2)


def forcing_constant(f: ForcingSpec, p: PhysicalParams, cfg: DiagnosticsConfig, energy_bound: float) -> float:
    """c1 with ∫f(φ)φ ≤ c1∫φ_x² along trajectories of energy ≤ energy_bound.

    Power law: ∫f(φ)φ ≤ k0‖φ‖_∞^θ cp‖φ_x‖², ‖φ‖_∞² ≤ ‖φ_x‖²/4 and
    δ‖φ_x‖² ≤ ‖U‖²_H ≤ 2E.
    """
    if f.is_linear:
        return 0.0
    if f.kind != "power_law":
        raise DiagnosticsError("forcing constant only certified for the power-law family")
    sup = math.sqrt(max(energy_bound, 0.0) / (2.0 * p.delta))
    return f.k0 * cfg.cp * sup**f.theta


def auto_lyapunov_config(p: PhysicalParams, cfg: DiagnosticsConfig = DiagnosticsConfig(),
                         f: ForcingSpec | None = None, energy_bound: float = 0.0,
                         margin: float = 0.01, safety: float = 1.1) -> LyapunovConfig:
    """Pick (λ₂, ε, N, λ̃₂, M) in the order the decay estimate fixes them.

    "Small enough" choices take half their cap, "large enough" ones take
    ``safety`` times their floor. M makes the ψ² and z²(·,1) coefficients of
    the Lyapunov derivative bound at most −margin, and also exceeds the
    equivalence constant so that 𝓛 and E stay comparable.
    """
    if not p.mu2 < p.mu1:
        raise DiagnosticsError("decay recipe needs μ₂ < μ₁")
    f = f or ForcingSpec.zero()
    CE = energy_decay_constant(p)
    if not CE > 0:
        raise DiagnosticsError(f"C_E = {CE:g} is not positive; move η inside its window")
    rx = math.sqrt(p.xi)
    cp = cfg.cp
    k0 = 0.0 if f.is_linear else f.k0
    beta = beta_of(p)

    lam2 = 0.5 * p.delta / p.mu2
    eps = 0.5 * _eps_cap(p, beta)
    c1 = forcing_constant(f, p, cfg, energy_bound)
    n_floor = (rx * beta / 8.0 * (p.delta + eps + c1 + 2 * p.xi**2 * cp / p.b**2 * (p.mu - p.b**2 / p.xi))
               + p.xi**2 * cp / (12 * rx) + 6 * k0 / rx + p.delta**2 / (2 * eps)
               + p.delta**2 / (4 * eps**2) + p.delta**2 / 2 + p.xi / p.mu
               + 2 * p.xi**2 * cp * eps / p.mu + 4 * p.xi**2 * cp * eps / p.b**2)
    Nw = safety * n_floor / (p.delta - p.mu2 * lam2)
    lam2t = 0.5 * rx * beta / (32.0 * Nw * cp)

    rest_psi = (-rx * beta * p.J / 8 + Nw * (p.J + p.rho * p.b**2 / (4 * p.mu**2 * lam2t))
                + (p.J * rx + p.mu1**2 / rx) + (p.J * p.delta / (2 * eps) + p.mu1**2 / (4 * eps**2))
                + 1.0 / p.tau)
    rest_z = (p.mu2**2 * cp / (32 * eps) + Nw * p.mu2**2 * cp / (4 * lam2) + p.mu2**2 / rx
              + p.mu2**2 / (4 * eps**2) - math.exp(2 * p.tau) / p.tau)
    m_floor = max((rest_psi + margin) / CE, (rest_z + margin) / CE, 0.0)
    lcfg = LyapunovConfig(Mw=1.0, Nw=Nw, eps=eps, lam2=lam2, lam2t=lam2t, beta=beta)
    m_floor = max(m_floor, equivalence_constant(p, cfg, lcfg))
    return lcfg.scaled(Mw=safety * m_floor)


def equivalence_constant(p: PhysicalParams, cfg: DiagnosticsConfig, lcfg: LyapunovConfig) -> float:
    """C̃ = max α_i, so that |𝓛 − M·E| ≤ C̃·E."""
    rx = math.sqrt(p.xi)
    cp, beta, Nw, eps = cfg.cp, lcfg.beta, lcfg.Nw, lcfg.eps
    a1 = rx * beta / 8 + Nw + p.J * p.b**2 / p.rho + 2 * eps / p.mu
    a2 = rx * beta / 8 + Nw + 1 + p.delta / (2 * eps)
    a3 = (rx * beta * cp * (p.J + p.mu) / (8 * p.delta)
          + p.xi**2.5 * beta * p.rho * cp**2 / (4 * p.delta * p.b**2)
          + Nw * cp / p.delta * (p.J + p.mu1 + p.rho * p.xi * cp / p.mu)
          + p.J / p.delta + p.J / (2 * eps) + 4 * p.rho * p.xi**2 * cp * eps / (p.mu * p.delta * p.b**2))
    a4 = 3 * p.xi**1.5 * beta * p.rho * cp / (8 * p.b**2) + p.J + 6 * p.rho * p.xi * eps / (p.mu * p.b**2)
    a5 = 2.0 / p.eta
    return max(a1, a2, a3, a4, a5)


def sample_diagnostics(s: SimState, p: PhysicalParams, f: ForcingSpec, cfg: DiagnosticsConfig,
                       lcfg: LyapunovConfig | None = None) -> dict[str, float]:
    """One row of the diagnostics table."""
    g = grid_of(s)
    h = g.h
    eb = energy(s, p, f, cfg)
    E = eb.total
    row = {
        "E": E,
        "Hnormsq": 2.0 * (E - eb.forcing_potential),
        "normsq_u_t": normsq(s.v, h),
        "normsq_phi_t": normsq(s.psi, h),
        "normsq_z1": normsq(s.z[:, -1], h),
    }
    parts = lyapunov_components(s, p, f, cfg, lcfg or _PLACEHOLDER_LCFG)
    row.update(I1=parts.I1, I2=parts.I2, I3=parts.I3, I4=parts.I4, w_residual=parts.w_residual)
    if lcfg is not None:
        row.update(B1=parts.B1, B2=parts.B2, L=combine_lyapunov(E, parts, p, lcfg))
    else:
        row.update(B1=math.nan, B2=math.nan, L=math.nan)
    return row


# B1/B2 depend on ε; without a valid config they are reported as NaN
_PLACEHOLDER_LCFG = LyapunovConfig(Mw=0.0, Nw=0.0, eps=1.0, lam2=0.0, lam2t=0.0, beta=0.0)

DIAGNOSTIC_COLUMNS = ("E", "L", "I1", "I2", "I3", "I4", "B1", "B2", "Hnormsq",
                      "normsq_u_t", "normsq_phi_t", "normsq_z1", "w_residual")


def lyapunov_config_for_run(p: PhysicalParams, f: ForcingSpec, cfg: DiagnosticsConfig,
                            E0: float) -> LyapunovConfig | None:
    """Auto config when the decay hypotheses hold, else None."""
    rep = validate_params(p)
    if not (rep.admissible and rep.strict_delay_bound) or energy_decay_constant(p) <= 0:
        return None
    return auto_lyapunov_config(p, cfg, f, energy_bound=E0)
