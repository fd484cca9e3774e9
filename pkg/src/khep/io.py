"""Serialization formats and the content-addressed catalog.

Formats:
  * trajectory CSV with columns t,x,y,z,px,py,pz,H,ptheta,J at 17
    significant digits (the float64 round-trip width);
  * compact binary trajectory: magic "KHEP", version u16, record count
    u64, then 9 little-endian float64 per record (t, state, H, J);
  * JSON for orbit records and experiment reports.

Catalog entries live under <root>/<kind>/<hash>/ with params.json, the
data files, and summary.txt; the hash covers every byte of the entry,
so identical command + seed reruns land on identical paths. Writes go
to a temp directory renamed into place, so concurrent writers are safe.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics
from .dynamics import PhaseState
from .integrator import Trajectory
from .search import OrbitRecord, RotationNumber

BINARY_MAGIC = b"KHEP"
BINARY_VERSION = 1

CSV_HEADER = "t,x,y,z,px,py,pz,H,ptheta,J"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def trajectory_csv(traj: Trajectory) -> str:
    h = dynamics.hamiltonian_arr(traj.states)
    pt = dynamics.ptheta_arr(traj.states)
    j = dynamics.dilational_arr(traj.states)
    lines = [CSV_HEADER]
    for i in range(len(traj.times)):
        row = [traj.times[i], *traj.states[i], h[i], pt[i], j[i]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """(times, states) from trajectory CSV; raises naming the bad line."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split(",")[:7] != CSV_HEADER.split(",")[:7]:
        raise ValueError("line 1: expected trajectory header "
                         f"'{CSV_HEADER}'")
    times, states = [], []
    for num, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) < 7:
            raise ValueError(f"line {num}: expected >=7 columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts[:7]]
        except ValueError as exc:
            raise ValueError(f"line {num}: {exc}") from None
        times.append(vals[0])
        states.append(vals[1:7])
    return np.array(times), np.array(states)


def trajectory_binary(traj: Trajectory) -> bytes:
    h = dynamics.hamiltonian_arr(traj.states)
    j = dynamics.dilational_arr(traj.states)
    n = len(traj.times)
    out = bytearray()
    out += BINARY_MAGIC
    out += struct.pack("<HQ", BINARY_VERSION, n)
    rec = np.empty((n, 9))
    rec[:, 0] = traj.times
    rec[:, 1:7] = traj.states
    rec[:, 7] = h
    rec[:, 8] = j
    out += rec.astype("<f8").tobytes()
    return bytes(out)


def parse_trajectory_binary(blob: bytes) -> dict:
    if blob[:4] != BINARY_MAGIC:
        raise ValueError("bad magic; not a trajectory binary")
    version, n = struct.unpack_from("<HQ", blob, 4)
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported binary version {version}")
    rec = np.frombuffer(blob, dtype="<f8", offset=14).reshape(n, 9)
    return {"times": rec[:, 0].copy(), "states": rec[:, 1:7].copy(),
            "H": rec[:, 7].copy(), "J": rec[:, 8].copy()}


def orbit_record_json(record: OrbitRecord) -> str:
    data = {
        "initial_state": list(record.initial_state.as_array()),
        "period": record.period,
        "rotation": {"j": record.rotation.j, "k": record.rotation.k,
                     "confidence": record.rotation.confidence,
                     "spectral_ok": record.rotation.spectral_ok},
        "ptheta": record.ptheta,
        "H": record.H,
        "J": record.J,
        "objective": record.objective_value,
        "symmetry_residual": record.symmetry_residual,
        "domain_time": record.domain_time,
        "provenance": record.provenance,
    }
    return json.dumps(data, sort_keys=True, indent=1)


def parse_orbit_record_json(text: str) -> OrbitRecord:
    data = json.loads(text)
    rot = data["rotation"]
    return OrbitRecord(
        initial_state=PhaseState.from_array(data["initial_state"]),
        period=data["period"],
        rotation=RotationNumber(rot["j"], rot["k"], rot["confidence"],
                                rot["spectral_ok"]),
        ptheta=data["ptheta"],
        H=data["H"],
        J=data["J"],
        objective_value=data["objective"],
        symmetry_residual=data["symmetry_residual"],
        domain_time=data["domain_time"],
        provenance=data["provenance"],
    )


def dumps_json(obj) -> str:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = dataclasses.asdict(obj)
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    raise TypeError(f"not JSON serializable: {type(v)}")


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    hash: str
    path: Path
    params: dict

    def read_file(self, name: str) -> bytes:
        return (self.path / name).read_bytes()


class Catalog:
    """Content-addressed result store: catalog/<kind>/<hash>/files."""

    KINDS = ("trajectory", "orbit", "domain", "report")

    def __init__(self, root: str | Path | None = None):
        if root is None:
            root = os.environ.get("KHEP_CATALOG", "catalog")
        self.root = Path(root)

    @staticmethod
    def content_hash(files: dict[str, bytes]) -> str:
        digest = hashlib.sha256()
        for name in sorted(files):
            digest.update(name.encode())
            digest.update(b"\0")
            digest.update(files[name])
            digest.update(b"\0")
        return digest.hexdigest()[:16]

    def put(self, kind: str, params: dict, files: dict[str, bytes | str],
            summary: str) -> CatalogEntry:
        if kind not in self.KINDS:
            raise ValueError(f"unknown catalog kind {kind!r}")
        blobs = {"params.json": dumps_json(params).encode(),
                 "summary.txt": summary.encode()}
        for name, content in files.items():
            blobs[name] = content.encode() if isinstance(content, str) else content
        digest = self.content_hash(blobs)
        dest = self.root / kind / digest
        if dest.exists():
            return CatalogEntry(kind, digest, dest, params)
        self.root.joinpath(kind).mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(dir=self.root / kind, prefix=".tmp-"))
        try:
            for name, blob in blobs.items():
                (tmp / name).write_bytes(blob)
            os.replace(tmp, dest)
        except OSError:
            for leftover in tmp.glob("*"):
                leftover.unlink()
            if tmp.exists():
                tmp.rmdir()
            if not dest.exists():
                raise
        return CatalogEntry(kind, digest, dest, params)

    def get(self, kind: str, digest: str) -> CatalogEntry:
        path = self.root / kind / digest
        if not path.is_dir():
            # allow unique hash prefixes
            matches = list((self.root / kind).glob(digest + "*")) \
                if (self.root / kind).is_dir() else []
            if len(matches) == 1:
                path = matches[0]
            else:
                raise FileNotFoundError(f"no {kind} entry {digest}")
        params = json.loads((path / "params.json").read_text())
        return CatalogEntry(kind, path.name, path, params)

    def find(self, digest: str) -> CatalogEntry:
        """Look a hash up across all kinds."""
        for kind in self.KINDS:
            try:
                return self.get(kind, digest)
            except FileNotFoundError:
                continue
        raise FileNotFoundError(f"no catalog entry {digest}")

    def entries(self):
        for kind in self.KINDS:
            base = self.root / kind
            if not base.is_dir():
                continue
            for path in sorted(base.iterdir()):
                if path.is_dir() and not path.name.startswith("."):
                    params = json.loads((path / "params.json").read_text())
                    yield CatalogEntry(kind, path.name, path, params)
