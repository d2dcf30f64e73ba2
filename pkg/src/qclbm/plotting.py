"""SVG figures from the CSV tables written by the CLI."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "qclbm"


def _read(path: Path):
    from .cli import read_csv

    schema, rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path}: no data rows to plot")
    return schema, rows


def _save(fig, out: Path, name: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.svg"
    # fixed metadata keeps the SVG byte-stable across runs
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_rmse(rows, out: Path, stem: str) -> Path:
    series = defaultdict(list)
    for r in rows:
        series[(r["use_case"], r["nx"], r["omega"], r["order"])].append((int(r["t"]), float(r["rmse"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (uc, nx, w, order), pts in sorted(series.items()):
        t, e = zip(*sorted(pts))
        ax.plot(t, e, label=f"{uc} N={nx} w={w} order {order}", ls="-" if order == "1" else "--")
    ax.set_xlabel("time step")
    ax.set_ylabel("RMSE")
    ax.legend(fontsize=7)
    return _save(fig, out, stem)


def plot_histograms(rows, out: Path, stem: str) -> Path:
    series = defaultdict(list)
    for r in rows:
        series[(r["use_case"], r["nx"], r["omega"], r["n_steps"])].append((float(r["bin_lo"]), float(r["bin_hi"]), int(r["count"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, bins in sorted(series.items()):
        bins.sort()
        total = sum(c for _, _, c in bins) or 1
        ax.stairs([c / total for _, _, c in bins], [bins[0][0]] + [hi for _, hi, _ in bins], label="{} N={} w={} Nt={}".format(*key))
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("fraction of eigenvalues")
    ax.legend(fontsize=7)
    return _save(fig, out, stem)


def plot_hhl(rows, out: Path, stem: str) -> Path:
    ok = [r for r in rows if r["status"] == "ok"]
    if not ok:
        raise ValueError("no successful HHL rows to plot")
    series = defaultdict(list)
    for r in ok:
        series[(r["use_case"], r["nx"], r["omega"], r["n_steps"])].append((int(r["t0"]), float(r["eps_evolved_median"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(series.items()):
        t, e = zip(*sorted(pts))
        ax.semilogy(t, e, marker="o", label="{} N={} w={} Nt={}".format(*key))
    ax.set_xlabel("t0")
    ax.set_ylabel("fidelity error (evolved blocks)")
    ax.legend(fontsize=7)
    return _save(fig, out, stem)


def plot_velocity(rows, out: Path, stem: str) -> Path:
    import numpy as np

    nx, ny = int(rows[0]["nx"]), int(rows[0]["ny"])
    first = [r for r in rows if (r["use_case"], r["nx"], r["omega"]) == (rows[0]["use_case"], rows[0]["nx"], rows[0]["omega"])]
    u = np.zeros((ny, nx, 2))
    for r in first:
        u[int(r["y"]), int(r["x"])] = float(r["ux"]), float(r["uy"])
    fig, ax = plt.subplots(figsize=(5, 5))
    speed = np.hypot(u[..., 0], u[..., 1])
    im = ax.imshow(speed, origin="lower", cmap="viridis")
    fig.colorbar(im, ax=ax, label="|u|")
    ax.quiver(np.arange(nx), np.arange(ny), u[..., 0], u[..., 1], color="white")
    ax.set_aspect("equal")
    ax.set_title(f"{rows[0]['use_case']} velocity")
    return _save(fig, out, stem)


PLOTTERS = {
    "carleman_rmse": plot_rmse,
    "histogram": plot_histograms,
    "hhl": plot_hhl,
    "velocity": plot_velocity,
}


def plot_csv(path: Path, out: Path) -> List[Path]:
    schema, rows = _read(path)
    if schema not in PLOTTERS:
        raise ValueError(f"{path}: no plot defined for schema {schema!r}")
    return [PLOTTERS[schema](rows, out, path.stem)]
