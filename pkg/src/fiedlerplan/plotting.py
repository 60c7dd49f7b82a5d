"""Static figures for a finished run, written to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import ScenarioConfig  # noqa: E402
from .objectives import BASE_STATION  # noqa: E402
from .sim import SimTrace  # noqa: E402


def plot_paths(trace: SimTrace, config: ScenarioConfig, path: str | Path) -> Path:
    """Top view of every robot's path; POIs and the base station are marked."""
    pos = trace.positions()
    fig, ax = plt.subplots(figsize=(6, 6))
    relay = np.ones(pos.shape[1], dtype=bool)
    if trace.assignment is not None:
        relay = trace.assignment.sum(axis=0) == 0
    for i in range(pos.shape[1]):
        style = "--" if relay[i] else "-"
        ax.plot(pos[:, i, 0], pos[:, i, 1], style, lw=1)
        ax.plot(pos[-1, i, 0], pos[-1, i, 1], "o", ms=4, color=ax.lines[-1].get_color())
    ax.plot(*pos[0, BASE_STATION, :2], "ks", ms=8, label="base station")
    if trace.pois is not None:
        ax.plot(trace.pois[:, 0], trace.pois[:, 1], "rx", ms=9, mew=2, label="POI")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{config.mode}, seed {config.seed}")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_fiedler(traces: dict[str, SimTrace], config: ScenarioConfig, path: str | Path) -> Path:
    """Exact Fiedler value over iterations, with the hard (and soft) bounds."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, trace in traces.items():
        ax.plot(trace.column("k"), trace.column("lambda2_exact"), lw=1.2, label=label)
    ax.axhline(config.lambda2_min, color="r", ls="--", lw=1, label="hard bound")
    if config.mode == "cis":
        ax.axhline(config.lambda2_soft, color="orange", ls=":", lw=1, label="soft bound")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\lambda_2$")
    ax.set_ylim(bottom=0)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_runtimes(times: dict[str, np.ndarray], path: str | Path) -> Path:
    """Histogram of per-iteration times (log scale) for each planner."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, t in times.items():
        t = np.asarray(t, dtype=float)
        bins = np.logspace(np.log10(max(t.min(), 1e-3)), np.log10(t.max() + 1e-9), 30)
        ax.hist(t, bins=bins, alpha=0.6, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("iteration time [ms]")
    ax.set_ylabel("count")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
