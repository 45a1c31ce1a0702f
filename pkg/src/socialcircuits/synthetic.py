"""Planted-circuit data for tutorials and oracle tests."""

from __future__ import annotations

import re
from typing import Sequence

from .circuit_builder import Circuit
from .circuit_simulator import SimConfig, planted_circuit, simulate
from .errors import ConfigError
from .event_store import FightSeries, Roster

_EDGE = re.compile(r"^\s*([^>:]+?)\s*>\s*([^>:]+?)\s*:\s*([-+0-9.eE]+)\s*$")


def default_ids(n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"i{k:0{width}d}" for k in range(n)]


def parse_edge_spec(text: str) -> tuple[list[str], list[str], float]:
    """``"A+B>C:0.6"`` -> (["A", "B"], ["C"], 0.6)."""
    m = _EDGE.match(text)
    if not m:
        raise ConfigError(f"edge spec {text!r} is not of the form SRC+SRC>DST:weight")
    src = [x.strip() for x in m.group(1).split("+") if x.strip()]
    dst = [x.strip() for x in m.group(2).split("+") if x.strip()]
    return src, dst, float(m.group(3))


def generate(ids: Sequence[str], edges: Sequence[str | tuple], baseline: float | Sequence[float],
             n_events: int, seed: int, min_fight_size: int = 2, combine: str = "sum") -> tuple[FightSeries, Circuit]:
    roster = Roster.from_ids(ids)
    parsed = [parse_edge_spec(e) if isinstance(e, str) else e for e in edges]
    circuit = planted_circuit(roster, parsed, baseline, combine=combine)
    cfg = SimConfig(n_events=n_events, seed=seed, seeding_rule="random_pair", min_fight_size=min_fight_size)
    return simulate(circuit, None, cfg), circuit
