"""Scenario documents: parsing, presets, overrides and content hashing.

A scenario is a TOML document with sections [params], [forcing], [initial],
[grid], [time] and [output], plus an optional top-level ``seed``.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import model
from .model import ForcingSpec, InitialData, PhysicalParams
from .state import GridSpec, build_grid

DEFAULT_SEED = 0xC0FFEE


class ScenarioError(ValueError):
    pass


def default_document() -> dict:
    """The reference desk-scale scenario (equal wave speeds, mid-window η)."""
    return {
        "seed": DEFAULT_SEED,
        "params": {"rho": 1.0, "mu": 1.0, "J": 1.0, "delta": 1.0, "xi": 1.0, "b": 0.5,
                   "mu1": 0.5, "mu2": 0.25, "tau": 1.0, "eta": "auto"},
        "forcing": {"kind": "power_law", "k0": 1.0, "theta": 1.0},
        "initial": {"u0": "zero", "u1": "zero", "phi0": "sine_mode:1,0.1", "phi1": "zero", "f0": "zero"},
        "grid": {"N": 100, "M": 41},
        "time": {"t_end": 30.0, "cfl": 0.5, "out_every": 1},
        "output": {"dir": "out", "formats": ["csv", "json"], "snapshots": False},
    }


@dataclass(frozen=True)
class TimeSpec:
    t_end: float = 30.0
    cfl: float = 0.5
    out_every: int = 1
    dt: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")
    snapshots: bool = False


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams
    forcing: ForcingSpec
    initial: InitialData
    grid: GridSpec
    time: TimeSpec
    output: OutputSpec
    seed: int = DEFAULT_SEED
    document: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def content_hash(self) -> str:
        return document_hash(self.document)

    def with_overrides(self, **dotted) -> "Scenario":
        """Copy with dotted-path overrides, e.g. ``params__mu2=0.1`` or
        ``{"params.mu2": 0.1}`` via :func:`apply_overrides`."""
        doc = apply_overrides(self.document, {k.replace("__", "."): v for k, v in dotted.items()})
        return from_document(doc)


def document_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# presets


def parse_profile(spec) -> model.Profile:
    """Spatial profile from a preset string or a polynomial coefficient list."""
    if isinstance(spec, (list, tuple)):
        return model.polynomial([float(c) for c in spec])
    if not isinstance(spec, str):
        raise ScenarioError(f"cannot interpret initial profile {spec!r}")
    name, _, argstr = spec.partition(":")
    args = [float(a) for a in argstr.split(",") if a.strip()] if argstr else []
    name = name.strip()
    try:
        if name == "zero":
            return model._zero_profile
        if name == "sine_mode":
            k = int(args[0]) if args else 1
            return model.sine_mode(k, args[1] if len(args) > 1 else 1.0)
        if name == "gaussian_bump":
            return model.gaussian_bump(*args)
        if name == "poly":
            return model.polynomial(args)
    except (TypeError, IndexError) as exc:
        raise ScenarioError(f"bad arguments for preset {spec!r}") from exc
    raise ScenarioError(f"unknown initial-data preset {name!r}")


def parse_history(spec, phi1: model.Profile) -> model.History:
    if spec in (None, "zero"):
        return model._zero_history
    if spec == "match_phi1":
        return model.separable_history(phi1, 0.0)
    if isinstance(spec, dict):
        return model.separable_history(parse_profile(spec.get("profile", "zero")),
                                       float(spec.get("rate", 0.0)))
    if isinstance(spec, str):
        return model.separable_history(parse_profile(spec), 0.0)
    raise ScenarioError(f"cannot interpret history {spec!r}")


# ---------------------------------------------------------------------------
# documents


def _coerce(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides: dict) -> dict:
    out = copy.deepcopy(doc)
    for key, value in overrides.items():
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = _coerce(value) if isinstance(value, str) else value
    return out


def parse_override_args(items) -> dict:
    ov = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ScenarioError(f"override must look like key=value, got {item!r}")
        ov[key.strip()] = val.strip()
    return ov


def from_document(doc: dict) -> Scenario:
    base = default_document()
    merged = {k: ({**base[k], **doc.get(k, {})} if isinstance(base[k], dict) else doc.get(k, base[k]))
              for k in base}
    for k in doc:
        if k not in merged:
            raise ScenarioError(f"unknown scenario section {k!r}")

    pr = merged["params"]
    unknown = set(pr) - set(PhysicalParams.__dataclass_fields__)
    if unknown:
        raise ScenarioError(f"unknown params {sorted(unknown)}")
    auto_eta = pr.get("eta", "auto") == "auto"
    try:
        pvals = {k: float(v) for k, v in pr.items() if not (k == "eta" and auto_eta)}
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"params must be numeric: {exc}") from exc
    params = PhysicalParams(**pvals)
    if auto_eta:
        # midpoint of the admissible window; lower end when the window is empty
        win = model.admissible_eta_interval(params)
        params = params.replace(eta=win.default if not win.empty else win.lo)

    fo = merged["forcing"]
    try:
        if fo["kind"] == "custom_table":
            forcing = ForcingSpec.table(fo["table_s"], fo["table_f"])
        elif fo["kind"] == "zero":
            forcing = ForcingSpec.zero()
        else:
            forcing = ForcingSpec(kind=fo["kind"], k0=float(fo.get("k0", 1.0)), theta=float(fo.get("theta", 1.0)))
    except KeyError as exc:
        raise ScenarioError(f"forcing section missing {exc}") from exc

    ini = merged["initial"]
    phi1 = parse_profile(ini["phi1"])
    initial = InitialData(u0=parse_profile(ini["u0"]), u1=parse_profile(ini["u1"]),
                          phi0=parse_profile(ini["phi0"]), phi1=phi1,
                          f0=parse_history(ini.get("f0"), phi1))

    gr = merged["grid"]
    grid = build_grid(gr["N"], gr["M"])
    ti = merged["time"]
    time = TimeSpec(t_end=float(ti["t_end"]), cfl=float(ti["cfl"]), out_every=int(ti["out_every"]),
                    dt=float(ti["dt"]) if ti.get("dt") is not None else None)
    if not (time.t_end > 0 and time.out_every >= 1 and time.cfl > 0):
        raise ScenarioError("time section needs t_end > 0, cfl > 0, out_every >= 1")
    ou = merged["output"]
    output = OutputSpec(dir=str(ou["dir"]), formats=tuple(ou["formats"]), snapshots=bool(ou["snapshots"]))
    return Scenario(params, forcing, initial, grid, time, output, int(merged["seed"]), merged)


def default_scenario(**overrides) -> Scenario:
    doc = apply_overrides(default_document(), {k.replace("__", "."): v for k, v in overrides.items()})
    return from_document(doc)


def load_scenario(path: str | Path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return from_document(apply_overrides(doc, overrides or {}))
