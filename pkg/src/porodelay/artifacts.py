"""On-disk artifacts: diagnostics CSV, JSON summaries, eigenvalue dumps, snapshots.

Every file carries the scenario content hash. Readers take an optional
``expected_hash`` and raise :class:`HashMismatchError` when it disagrees.

Snapshot layout (``.bin``): a 64-byte ASCII header holding compact JSON
``{"N":..,"M":..,"t":..,"h":"<first 8 hex digits of the scenario hash>"}``
right-padded with spaces, followed by 4N + N·M little-endian float64 values:
u, v, phi, psi (N each, node order x_1..x_N), then z as an N×M row-major block
(row i is x_i, column j is y_j, so z[i, 0] = psi[i]).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .state import SimState, Trajectory

HEADER_BYTES = 64
SNAPSHOT_HASH_CHARS = 8
CSV_LEAD_COLUMNS = ("t", "E", "L", "I1", "I2", "I3", "I4", "normsq_u_t", "normsq_phi_t", "normsq_z1")


class HashMismatchError(ValueError):
    pass


class ArtifactError(ValueError):
    pass


def _check_hash(found: str, expected: str | None, path) -> None:
    if expected is None:
        return
    n = min(len(found), len(expected))
    if n == 0 or found[:n] != expected[:n]:
        raise HashMismatchError(f"{path}: scenario hash {found!r} does not match {expected!r}")


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# diagnostics CSV


def csv_columns(traj: Trajectory) -> list[str]:
    present = ["t"] + list(traj.series)
    lead = [c for c in CSV_LEAD_COLUMNS if c in present]
    return lead + [c for c in present if c not in lead]


def write_diagnostics_csv(path, traj: Trajectory, scenario_hash: str) -> Path:
    path = Path(path)
    cols = csv_columns(traj)
    data = {"t": traj.times, **traj.series}
    with path.open("w", newline="") as fh:
        fh.write(f"# scenario_hash: {scenario_hash}\n")
        if traj.metadata.get("incomplete"):
            fh.write("# incomplete: true\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k in range(len(traj.times)):
            w.writerow([_fmt(data[c][k]) for c in cols])
    return path


def read_diagnostics_csv(path, expected_hash: str | None = None) -> tuple[str, dict[str, np.ndarray]]:
    path = Path(path)
    found = None
    with path.open() as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# scenario_hash:"):
            found = line.split(":", 1)[1].strip()
        elif not line.startswith("#"):
            body.append(line)
    if found is None:
        raise ArtifactError(f"{path}: missing scenario hash line")
    _check_hash(found, expected_hash, path)
    rows = list(csv.reader(body))
    cols = rows[0]
    arr = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(cols))
    return found, {c: arr[:, k] for k, c in enumerate(cols)}


# ---------------------------------------------------------------------------
# JSON


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path, payload: dict, scenario_hash: str) -> Path:
    path = Path(path)
    doc = {**_jsonable(payload), "scenario_hash": scenario_hash}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path, expected_hash: str | None = None) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text())
    if "scenario_hash" not in doc:
        raise ArtifactError(f"{path}: missing scenario_hash")
    _check_hash(doc["scenario_hash"], expected_hash, path)
    return doc


# ---------------------------------------------------------------------------
# eigenvalues


def write_eigenvalues(csv_path, json_path, eigs: np.ndarray, *, abscissa: float, N: int, M: int,
                      params_hash: str, scenario_hash: str) -> None:
    eigs = np.asarray(eigs)
    order = np.lexsort((eigs.imag, -eigs.real))
    with Path(csv_path).open("w", newline="") as fh:
        fh.write(f"# scenario_hash: {scenario_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im"])
        for lam in eigs[order]:
            w.writerow([_fmt(lam.real), _fmt(lam.imag)])
    write_json(json_path, {"abscissa": abscissa, "n": N, "m": M, "params_hash": params_hash}, scenario_hash)


# ---------------------------------------------------------------------------
# binary snapshots


def snapshot_header(N: int, M: int, t: float, scenario_hash: str) -> bytes:
    head = json.dumps({"N": N, "M": M, "t": float(t), "h": scenario_hash[:SNAPSHOT_HASH_CHARS]},
                      separators=(",", ":")).encode("ascii")
    if len(head) > HEADER_BYTES:
        raise ArtifactError(f"snapshot header needs {len(head)} bytes, limit is {HEADER_BYTES}")
    return head.ljust(HEADER_BYTES, b" ")


def write_snapshot(path, s: SimState, scenario_hash: str) -> Path:
    path = Path(path)
    body = np.concatenate([s.u, s.v, s.phi, s.psi, s.z.ravel(order="C")]).astype("<f8")
    with path.open("wb") as fh:
        fh.write(snapshot_header(s.N, s.M, s.t, scenario_hash))
        fh.write(body.tobytes())
    return path


def read_snapshot(path, expected_hash: str | None = None) -> SimState:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_BYTES:
        raise ArtifactError(f"{path}: truncated header")
    head = json.loads(raw[:HEADER_BYTES].decode("ascii").rstrip())
    _check_hash(head["h"], expected_hash, path)
    N, M = int(head["N"]), int(head["M"])
    data = np.frombuffer(raw[HEADER_BYTES:], dtype="<f8")
    if data.size != 4 * N + N * M:
        raise ArtifactError(f"{path}: expected {4 * N + N * M} values, found {data.size}")
    u, v, phi, psi = (data[k * N:(k + 1) * N].copy() for k in range(4))
    z = data[4 * N:].reshape(N, M).copy()
    return SimState(float(head["t"]), u, v, phi, psi, z)
