"""Static SVG figures (optional; needs matplotlib)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .event_store import FightSeries  # noqa: E402
from .metrics import fight_size_distribution  # noqa: E402
from .strategy_extraction import DeltaPEdge  # noqa: E402

# fixed salt + no date keeps SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "socialcircuits"


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def size_overlay_svg(observed: FightSeries, simulated: FightSeries, path: Path) -> None:
    p, q = fight_size_distribution(observed).probabilities, fight_size_distribution(simulated).probabilities
    support = sorted(set(p) | set(q))
    x = np.arange(len(support))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(x - 0.2, [p.get(s, 0) for s in support], width=0.4, label="observed")
    ax.bar(x + 0.2, [q.get(s, 0) for s in support], width=0.4, label="simulated")
    ax.set_xticks(x, [str(s) for s in support])
    ax.set_xlabel("fight size")
    ax.set_ylabel("probability")
    ax.legend()
    _save(fig, Path(path))


def edge_bar_svg(edges: Sequence[DeltaPEdge], path: Path, top: int = 20) -> None:
    shown = list(edges)[:top]
    labels = ["+".join(e.source) + ">" + "+".join(e.target) for e in shown]
    fig, ax = plt.subplots(figsize=(6, 0.25 * len(shown) + 1))
    ax.barh(np.arange(len(shown)), [e.delta_p for e in shown])
    ax.set_yticks(np.arange(len(shown)), labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("ΔP")
    _save(fig, Path(path))
