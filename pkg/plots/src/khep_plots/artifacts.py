"""Readers for the serialized artifacts the plotting layer consumes.

This package never calls the dynamics core: everything is rebuilt from
trajectory CSV (t,x,y,z,px,py,pz,...), overlay CSV (direct plus
reconstructed columns), and domain JSON files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "px", "py", "pz")
OVERLAY_COLUMNS = ("t", "x", "y", "z", "px", "py", "pz",
                   "rx", "ry", "rz", "rpx", "rpy", "rpz")


class ArtifactError(ValueError):
    """Malformed input file; the message names the offending line."""


def read_csv_columns(path: str | Path, required: tuple[str, ...]) -> dict:
    """Parse a headered CSV into named float arrays."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ArtifactError(f"{path.name} line 1: file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in required if c not in header]
    if missing:
        raise ArtifactError(
            f"{path.name} line 1: missing columns {missing} in header")
    rows = []
    width = len(header)
    for num, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != width:
            raise ArtifactError(
                f"{path.name} line {num}: expected {width} columns, "
                f"got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ArtifactError(f"{path.name} line {num}: {exc}") from None
    if not rows:
        raise ArtifactError(f"{path.name} line 2: no data rows")
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


@dataclass(frozen=True)
class DomainInfo:
    t0: float
    t1: float
    t2: float
    lam: float
    collision_time: float | None
    z_crossings: tuple

    @classmethod
    def load(cls, path: str | Path) -> "DomainInfo":
        data = json.loads(Path(path).read_text())
        return cls(t0=data["t0"], t1=data["t1"], t2=data["t2"],
                   lam=data["lambda"],
                   collision_time=data.get("collision_time"),
                   z_crossings=tuple(data.get("z_crossings", ())))
