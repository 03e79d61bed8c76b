"""Physical parameters, nonlinear forcing and initial data.

Everything here is immutable once built. Validation never raises for
hypothesis violations; it reports them and lets the caller decide.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

EQUAL_SPEED_RTOL = 1e-12
COMPAT_TOL = 1e-8


class ModelError(ValueError):
    """Raised for malformed model inputs (bad forcing table, non-finite data)."""


@dataclass(frozen=True)
class PhysicalParams:
    rho: float = 1.0
    mu: float = 1.0
    J: float = 1.0
    delta: float = 1.0
    xi: float = 1.0
    b: float = 0.5
    mu1: float = 0.5
    mu2: float = 0.25
    tau: float = 1.0
    eta: float = 0.5

    def replace(self, **changes) -> "PhysicalParams":
        d = asdict(self)
        d.update(changes)
        return PhysicalParams(**d)

    def content_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    strict_delay_bound: bool  # mu2 < mu1, needed for the decay theorem
    equal_speed: bool
    speed_defect: float  # rho/mu - J/delta

    @property
    def admissible(self) -> bool:
        return not self.violations


def validate_params(p: PhysicalParams) -> ValidationReport:
    violations = []
    for name in ("rho", "mu", "J", "delta", "xi", "mu1", "mu2", "tau", "eta"):
        if not getattr(p, name) > 0:
            violations.append(f"{name} > 0")
    if p.b == 0:
        violations.append("b != 0")
    if p.b * p.b > p.mu * p.xi:
        violations.append("b² ≤ μξ")
    lo, hi = p.tau * p.mu2, p.tau * (2.0 * p.mu1 - p.mu2)
    if p.eta < lo:
        violations.append("η ≥ τμ₂")
    if p.eta > hi:
        violations.append("η ≤ τ(2μ₁−μ₂)")
    defect = p.rho / p.mu - p.J / p.delta
    scale = max(abs(p.rho / p.mu), abs(p.J / p.delta))
    return ValidationReport(
        violations=tuple(violations),
        strict_delay_bound=p.mu2 < p.mu1,
        equal_speed=abs(defect) <= EQUAL_SPEED_RTOL * scale,
        speed_defect=defect,
    )


@dataclass(frozen=True)
class EtaInterval:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def default(self) -> float:
        if self.empty:
            return math.nan
        return 0.5 * (self.lo + self.hi)


def admissible_eta_interval(p: PhysicalParams) -> EtaInterval:
    """Window of delay-energy weights keeping the generator dissipative."""
    return EtaInterval(p.tau * p.mu2, p.tau * (2.0 * p.mu1 - p.mu2))


def energy_decay_constant(p: PhysicalParams) -> float:
    """C_E = min{mu1 - mu2/2 - eta/(2 tau), eta/(2 tau) - mu2/2}."""
    r = p.eta / (2.0 * p.tau)
    return min(p.mu1 - 0.5 * p.mu2 - r, r - 0.5 * p.mu2)


# ---------------------------------------------------------------------------
# forcing


FORCING_KINDS = ("power_law", "zero", "custom_table")


@dataclass(frozen=True)
class ForcingSpec:
    kind: str = "power_law"
    k0: float = 1.0
    theta: float = 1.0
    # custom_table only: knots and values of a piecewise-linear f
    table_s: tuple[float, ...] = ()
    table_f: tuple[float, ...] = ()
    _knot_potential: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ModelError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "power_law":
            if self.k0 < 0 or not self.theta > 0:
                raise ModelError("power_law needs k0 >= 0 and theta > 0")
        elif self.kind == "custom_table":
            _check_table(self.table_s, self.table_f)
            object.__setattr__(self, "_knot_potential", _knot_potentials(self))

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls(kind="zero", k0=0.0)

    @classmethod
    def table(cls, s, f) -> "ForcingSpec":
        return cls(kind="custom_table", k0=0.0, table_s=tuple(map(float, s)),
                   table_f=tuple(map(float, f)))

    @property
    def is_linear(self) -> bool:
        return self.kind == "zero" or (self.kind == "power_law" and self.k0 == 0)


def _check_table(s, f):
    s = np.asarray(s, dtype=float)
    f = np.asarray(f, dtype=float)
    if s.ndim != 1 or s.shape != f.shape or s.size < 2:
        raise ModelError("custom_table needs matching knot/value arrays of length >= 2")
    if np.any(np.diff(s) <= 0):
        raise ModelError("custom_table knots must be strictly increasing")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(f))):
        raise ModelError("custom_table entries must be finite")
    probe = np.union1d(np.linspace(s[0], s[-1], 2001), np.append(s, 0.0))
    probe = probe[(probe >= s[0]) & (probe <= s[-1])]
    vals = np.interp(probe, s, f)
    if np.any(vals * probe < 0):
        bad = probe[np.argmax(vals * probe < 0)]
        raise ModelError(f"custom_table violates f(s)·s ≥ 0 near s={bad:g}")


def _table_f(spec: ForcingSpec, s):
    # linear extrapolation beyond the outer knots keeps f(s)s >= 0 only if
    # the end slopes allow it; callers keep states inside the table range
    ts = np.asarray(spec.table_s)
    tf = np.asarray(spec.table_f)
    s = np.asarray(s, dtype=float)
    out = np.interp(s, ts, tf)
    lo_slope = (tf[1] - tf[0]) / (ts[1] - ts[0])
    hi_slope = (tf[-1] - tf[-2]) / (ts[-1] - ts[-2])
    out = np.where(s < ts[0], tf[0] + lo_slope * (s - ts[0]), out)
    out = np.where(s > ts[-1], tf[-1] + hi_slope * (s - ts[-1]), out)
    return out


def _knot_potentials(spec: ForcingSpec) -> tuple[float, ...]:
    fun = lambda x: float(_table_f(spec, x))
    vals = []
    for sk in spec.table_s:
        v, _ = integrate.quad(fun, 0.0, sk, epsabs=1e-12, epsrel=1e-12,
                              points=[x for x in spec.table_s if min(0, sk) < x < max(0, sk)] or None,
                              limit=200)
        vals.append(v)
    return tuple(vals)


def forcing_eval(spec: ForcingSpec, s):
    """f(s); works elementwise on arrays."""
    if spec.kind == "zero":
        return np.zeros_like(np.asarray(s, dtype=float))
    if spec.kind == "power_law":
        s = np.asarray(s, dtype=float)
        return spec.k0 * np.abs(s) ** spec.theta * s
    return _table_f(spec, s)


def forcing_potential(spec: ForcingSpec, s):
    """Antiderivative of f from 0, elementwise."""
    if spec.kind == "zero":
        return np.zeros_like(np.asarray(s, dtype=float))
    if spec.kind == "power_law":
        s = np.asarray(s, dtype=float)
        return spec.k0 * np.abs(s) ** (spec.theta + 2.0) / (spec.theta + 2.0)
    # knot potentials come from quad; the interpolant is linear inside a
    # segment so the remainder from the segment's left knot is exact
    ts = np.asarray(spec.table_s)
    kp = np.asarray(spec._knot_potential)
    s = np.asarray(s, dtype=float)
    k = np.clip(np.searchsorted(ts, s), 1, ts.size - 1)
    left = ts[k - 1]
    f_left = _table_f(spec, left)
    f_s = _table_f(spec, s)
    inside = 0.5 * (f_left + f_s) * (s - left)
    return np.maximum(kp[k - 1] + inside, 0.0)


def lipschitz_factor(theta: float) -> float:
    """Combinatorial factor c(θ) for the local Lipschitz bound of k0|s|^θ s."""
    return max(1.0, 2.0 ** (theta - 1.0))


# ---------------------------------------------------------------------------
# initial data


Profile = Callable[[np.ndarray], np.ndarray]
History = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _zero_profile(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_history(x, s):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(s)).shape)


@dataclass(frozen=True)
class InitialData:
    u0: Profile = _zero_profile
    u1: Profile = _zero_profile
    phi0: Profile = _zero_profile
    phi1: Profile = _zero_profile
    f0: History = _zero_history  # f0(x, s) = phi_t(x, s) for s in (-tau, 0)


def sine_mode(k: int = 1, amp: float = 1.0) -> Profile:
    return lambda x: amp * np.sin(k * np.pi * np.asarray(x, dtype=float))


def gaussian_bump(center: float, width: float, amp: float = 1.0) -> Profile:
    def prof(x):
        x = np.asarray(x, dtype=float)
        return amp * np.exp(-(((x - center) / width) ** 2))
    return prof


def polynomial(coeffs) -> Profile:
    """Profile sum_k c_k x^k (lowest order first)."""
    c = np.asarray(coeffs, dtype=float)
    return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), c)


def separable_history(profile: Profile, rate: float = 0.0) -> History:
    """f0(x, s) = profile(x)·exp(rate·s)."""
    return lambda x, s: profile(x) * np.exp(rate * np.asarray(s, dtype=float))


def compatibility_gap(d: InitialData, x: np.ndarray) -> float:
    """max |f0(x, 0) - phi1(x)| on the given nodes."""
    return float(np.max(np.abs(d.f0(x, np.zeros_like(x)) - d.phi1(x)), initial=0.0))
