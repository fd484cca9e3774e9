"""Figure generation from serialized trajectory artifacts.

Four kinds: xy projections of single orbits, z(t) traces with zero
markers and fundamental-domain shading, direct-vs-reconstructed
self-similarity overlays, and multi-panel orbit galleries. Output is
SVG by default and byte-stable across reruns (fixed hash salt, no
date metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "khep"

import matplotlib.pyplot as plt  # noqa: E402  (backend pinned first)

from .artifacts import (OVERLAY_COLUMNS, TRAJECTORY_COLUMNS, ArtifactError,
                        DomainInfo, read_csv_columns)

KINDS = ("projection", "ztrace", "overlay", "gallery")

DIRECT_COLOR = "#3465a4"     # the orbit as integrated
SEGMENT_COLOR = "#75507b"    # the chosen fundamental domain
RECON_COLOR = "#f57900"      # the rotated/dilated reconstruction


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple
    output: Path
    domain_json: Path | None = None  # ztrace/overlay annotation source
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; "
                             f"choose from {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _save(fig, output: Path):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if output.suffix == ".svg" else {}
    fig.savefig(output, metadata=meta)
    plt.close(fig)


def _zero_crossing_times(t: np.ndarray, z: np.ndarray) -> np.ndarray:
    sign_change = np.nonzero(z[:-1] * z[1:] < 0)[0]
    out = list(t[np.nonzero(z == 0.0)[0]])
    for i in sign_change:
        frac = z[i] / (z[i] - z[i + 1])
        out.append(t[i] + frac * (t[i + 1] - t[i]))
    return np.array(sorted(out))


def render_projection(spec: PlotSpec):
    data = read_csv_columns(spec.inputs[0], TRAJECTORY_COLUMNS)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(data["x"], data["y"], color=DIRECT_COLOR, lw=0.8)
    ax.plot([0], [0], marker="o", color="black", ms=4)  # the sun
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(spec.title or Path(spec.inputs[0]).stem)
    _save(fig, spec.output)


def render_ztrace(spec: PlotSpec):
    data = read_csv_columns(spec.inputs[0], TRAJECTORY_COLUMNS)
    t, z = data["t"], data["z"]
    dom = DomainInfo.load(spec.domain_json) if spec.domain_json else None
    fig, ax = plt.subplots(figsize=(7, 3.2))
    zeros = (np.array(dom.z_crossings) if dom and dom.z_crossings
             else _zero_crossing_times(t, z))
    for tz in zeros:
        if t[0] <= tz <= t[-1]:
            ax.axvline(tz, color="0.75", lw=0.6)
    if dom is not None:
        ax.axvspan(dom.t0, dom.t2, color=SEGMENT_COLOR, alpha=0.12)
        for tb in (dom.t0, dom.t2):
            ax.axvline(tb, color=SEGMENT_COLOR, lw=1.6)
    ax.plot(t, z, color=DIRECT_COLOR, lw=0.9)
    ax.axhline(0.0, color="black", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("z")
    ax.set_title(spec.title or "z(t) with zeros"
                 + ("" if dom is None else " and fundamental domain"))
    _save(fig, spec.output)


def render_overlay(spec: PlotSpec):
    """Direct orbit, fundamental segment, and reconstruction, side by side.

    Left: xy projection; right: z against time with zero markers, the
    domain boundaries in bold, and the predicted collision time.
    """
    data = read_csv_columns(spec.inputs[0], OVERLAY_COLUMNS)
    seg = (read_csv_columns(spec.inputs[1], TRAJECTORY_COLUMNS)
           if len(spec.inputs) > 1 else None)
    dom = DomainInfo.load(spec.domain_json) if spec.domain_json else None
    fig, (axp, axz) = plt.subplots(
        1, 2, figsize=(10, 4), gridspec_kw={"width_ratios": [1, 1.4]})

    axp.plot(data["x"], data["y"], color=DIRECT_COLOR, lw=1.0,
             label="integrated")
    axp.plot(data["rx"], data["ry"], color=RECON_COLOR, lw=1.0, ls="--",
             label="reconstructed")
    if seg is not None:
        axp.plot(seg["x"], seg["y"], color=SEGMENT_COLOR, lw=1.4,
                 label="fundamental domain")
    axp.plot([0], [0], marker="o", color="black", ms=4)
    axp.set_aspect("equal")
    axp.set_xlabel("x")
    axp.set_ylabel("y")
    axp.legend(fontsize=8, loc="best")

    if seg is not None:
        axz.plot(seg["t"], seg["z"], color=SEGMENT_COLOR, lw=1.6)
    axz.plot(data["t"], data["z"], color=DIRECT_COLOR, lw=1.0)
    axz.plot(data["t"], data["rz"], color=RECON_COLOR, lw=1.0, ls="--")
    if dom is not None:
        for tz in dom.z_crossings:
            axz.axvline(tz, color="0.8", lw=0.6)
        for tb in (dom.t0, dom.t2):
            axz.axvline(tb, color=SEGMENT_COLOR, lw=1.8)
        if dom.collision_time is not None:
            axz.axvline(dom.collision_time, color="red", lw=1.2, ls=":")
            axz.annotate("collision", (dom.collision_time, 0.0),
                         color="red", fontsize=8, rotation=90,
                         textcoords="offset points", xytext=(4, 10))
    axz.axhline(0.0, color="black", lw=0.5)
    axz.set_xlabel("t")
    axz.set_ylabel("z")
    fig.suptitle(spec.title or "self-similar reconstruction")
    _save(fig, spec.output)


def gallery_grid(n: int) -> list[int]:
    """Panels per row; the 10-panel case mirrors the reference layout."""
    if n == 10:
        return [2, 4, 4]
    cols = max(1, math.ceil(math.sqrt(n)))
    rows = math.ceil(n / cols)
    out = [cols] * rows
    out[-1] = n - cols * (rows - 1)
    return out


def render_gallery(spec: PlotSpec):
    layout = gallery_grid(len(spec.inputs))
    ncols = max(layout)
    fig, axes = plt.subplots(len(layout), ncols,
                             figsize=(2.2 * ncols, 2.2 * len(layout)))
    axes = np.atleast_2d(axes)
    for ax in axes.flat:
        ax.set_axis_off()
    files = iter(spec.inputs)
    for r, width in enumerate(layout):
        offset = (ncols - width) // 2
        for c in range(width):
            path = next(files)
            data = read_csv_columns(path, TRAJECTORY_COLUMNS)
            ax = axes[r, offset + c]
            ax.plot(data["x"], data["y"], color=DIRECT_COLOR, lw=0.6)
            ax.plot([0], [0], marker="o", color="black", ms=2)
            ax.set_aspect("equal")
            ax.set_title(Path(path).stem, fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    _save(fig, spec.output)


_RENDERERS = {
    "projection": render_projection,
    "ztrace": render_ztrace,
    "overlay": render_overlay,
    "gallery": render_gallery,
}


def render(spec: PlotSpec) -> Path:
    """Dispatch a PlotSpec to its renderer; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return Path(spec.output)
