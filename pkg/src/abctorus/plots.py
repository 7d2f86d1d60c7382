"""Static PNG emission for build outputs: the stage partition colored by
the preimage of the composed analytic conjugator, an orbit scatter of the
final stage transform, and the per-stage strip-gap bars.

Plots are write-only artifacts; file metadata that would break
byte-stability (timestamps, tool banners) is suppressed.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def emit_all(result, out_dir) -> None:
    out = Path(out_dir)
    emit_partition(result, out / "partition.png")
    emit_orbit(result, out / "orbit.png")
    emit_gaps(result, out / "gaps.png")


def emit_partition(result, path, pixels: int = 360) -> None:
    stage = result.stages[-1]
    par = stage.params
    h_maps = [b.analytic.h_map for b in result.stages if b.analytic.h_map]
    from .analytic import stack_map
    big = stack_map(h_maps) if h_maps else None
    t = (np.arange(pixels) + 0.5) / pixels
    xs, ys = np.meshgrid(t, t, indexing="xy")
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    if big is not None:
        pre = big.inverse().apply(pts, reduce=True)
    else:
        pre = pts
    q = min(par.q, 64)  # coarsen huge stages so colors stay readable
    cell = (np.floor(pre[:, 0] * q).astype(int) % q) * par.s + \
        (np.floor(pre[:, 1] * par.s).astype(int) % par.s)
    img = cell.reshape(pixels, pixels)
    fig, ax = plt.subplots(figsize=(5, 5), dpi=110)
    ax.imshow(img, origin="lower", extent=(0, 1, 0, 1), cmap="twilight",
              interpolation="nearest")
    ax.set_title(f"stage-{par.n} cells by conjugator preimage")
    ax.set_xticks([]), ax.set_yticks([])
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def emit_orbit(result, path, iterates: int = 1500) -> None:
    stage = result.stages[-1]
    tmap = stage.analytic.transform
    alpha = float(stage.params.alpha % 1)
    fig, ax = plt.subplots(figsize=(5, 5), dpi=110)
    rng = np.random.default_rng(result.config.seed + 3)
    starts = rng.random((6, 2))
    from .analytic import stack_map
    h_maps = [b.analytic.h_map for b in result.stages if b.analytic.h_map]
    big = stack_map(h_maps)
    base = big.inverse().apply(starts)
    ts = np.arange(iterates)
    for i in range(starts.shape[0]):
        pts = np.tile(base[i], (iterates, 1))
        pts[:, 0] += ts * alpha
        orbit = big.apply(pts, reduce=True)
        ax.scatter(orbit[:, 0], orbit[:, 1], s=0.5, lw=0)
    ax.set_xlim(0, 1), ax.set_ylim(0, 1)
    ax.set_title(f"orbits of the stage-{stage.params.n} transform")
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def emit_gaps(result, path) -> None:
    ns, gaps, thresholds = [], [], []
    for b in result.stages[1:]:
        ns.append(b.params.n)
        gaps.append(b.analytic.gap_from_previous or 0.0)
        thresholds.append(result.config.eps_n(b.params.n - 1) / 2.0)
    fig, ax = plt.subplots(figsize=(5, 3.2), dpi=110)
    ax.bar([str(n) for n in ns], gaps, color="#37718e", label="estimated gap")
    ax.plot([str(n) for n in ns], thresholds, "r_", markersize=24,
            label="eps_n / 2")
    ax.set_yscale("log")
    ax.set_xlabel("stage")
    ax.set_ylabel("strip-metric gap")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
