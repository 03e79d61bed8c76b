"""Command-line entry point: ``porodelay {run,spectrum,verify}``.

Exit codes: 0 ok, 2 validation, 3 blow-up, 4 resource cap, 5 internal error,
130 interrupted (partial outputs written and flagged incomplete).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis as an
from . import artifacts
from . import model
from . import solver
from . import spectral
from . import verify
from .scenario import ScenarioError, Scenario, default_scenario, load_scenario, parse_override_args
from .state import GridError

EXIT_OK, EXIT_VALIDATION, EXIT_BLOWUP, EXIT_CAP, EXIT_INTERNAL, EXIT_INTERRUPTED = 0, 2, 3, 4, 5, 130

log = logging.getLogger("porodelay")


class ValidationFailure(Exception):
    pass


def _scenario(args) -> Scenario:
    overrides = parse_override_args(args.override)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.scenario:
        return load_scenario(args.scenario, overrides)
    return default_scenario(**overrides)


def _require_admissible(sc: Scenario) -> None:
    rep = model.validate_params(sc.params)
    if not rep.admissible:
        raise ValidationFailure("parameters violate: " + "; ".join(rep.violations))


def _out_dir(args, sc: Scenario) -> Path:
    out = Path(args.out or sc.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, traj, sc: Scenario) -> None:
    h = sc.content_hash
    if "csv" in sc.output.formats:
        artifacts.write_diagnostics_csv(out / "diagnostics.csv", traj, h)
    artifacts.write_json(out / "summary.json", an.run_summary(traj, sc), h)
    if sc.output.snapshots:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for k, s in enumerate(traj.states):
            artifacts.write_snapshot(snap / f"state_{k:06d}.bin", s, h)


def cmd_run(args) -> int:
    sc = _scenario(args)
    _require_admissible(sc)
    out = _out_dir(args, sc)
    try:
        traj = solver.run(sc, keep_states=sc.output.snapshots, progress=True)
    except solver.BlowUpError as exc:
        if exc.trajectory is not None and len(exc.trajectory):
            _write_run(out, exc.trajectory, sc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    _write_run(out, traj, sc)
    for w in traj.metadata["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if traj.metadata["incomplete"]:
        return EXIT_INTERRUPTED
    print(out / "summary.json")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    sc = _scenario(args)
    _require_admissible(sc)
    out = _out_dir(args, sc)
    Gm = spectral.assemble_generator(sc.grid, sc.params)
    eigs = spectral.spectrum(Gm)
    sigma = spectral.spectral_abscissa(eigs)
    artifacts.write_eigenvalues(out / "eigenvalues.csv", out / "spectrum.json", eigs, abscissa=sigma,
                                N=sc.grid.N, M=sc.grid.M, params_hash=sc.params.content_hash(),
                                scenario_hash=sc.content_hash)
    print(f"abscissa {sigma:.6e} (dimension {Gm.dim})")
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _scenario(args)
    gate = verify.hypothesis_gate(sc)
    if gate:
        raise ValidationFailure("decay hypotheses fail: " + "; ".join(gate))
    out = _out_dir(args, sc) if args.out else None
    pl = verify.Pipeline(sc, args.seed)
    verdicts = []
    for name, check in verify.CHECKS.items():
        print(f"running {name} ...", file=sys.stderr)
        verdicts.append(check(pl))
        print(verdicts[-1].line(), flush=True)
    if out is not None:
        for v in verdicts:
            artifacts.write_json(out / f"verdict_{v.name}.json", v.as_dict(), sc.content_hash)
    failed = [v.name for v in verdicts if not v.passed]
    print("all criteria pass" if not failed else "failing: " + ", ".join(failed))
    return EXIT_OK if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="porodelay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "integrate a scenario and write diagnostics"),
                            ("spectrum", cmd_spectrum, "eigenvalues of the linear generator"),
                            ("verify", cmd_verify, "run the acceptance pipeline")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", metavar="PATH", help="scenario TOML file (default: built-in)")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="64-bit seed for randomized checks")
        p.add_argument("--override", action="append", metavar="KEY=VALUE", default=[],
                       help="dotted-path override, e.g. params.mu2=0.1 (repeatable)")
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    try:
        return args.func(args)
    except (ValidationFailure, ScenarioError, model.ModelError, GridError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except spectral.ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
