"""First-order Markov simulation of fight sequences from a circuit.

Each step is one synchronous draw: every individual joins independently with

    q(x) = clip(baseline[x] + combine{w_e : source_e ⊆ previous, x ∈ target_e}, 0, 1)

Fights smaller than ``min_fight_size`` are redrawn up to ``max_resample``
times, after which the seeding rule supplies the next fight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circuit_builder import Circuit, CircuitEdge, CircuitVariant
from .errors import ConfigError, MissingSeedSeries
from .event_store import FightEvent, FightSeries, Roster

SEEDING_RULES = ("empirical_first", "random_pair")


@dataclass(frozen=True)
class SimConfig:
    n_events: int = 1000
    seed: int = 0
    seeding_rule: str = "empirical_first"
    min_fight_size: int = 2
    max_resample: int = 100

    def __post_init__(self):
        if self.n_events < 1:
            raise ConfigError("n_events must be >= 1")
        if self.seeding_rule not in SEEDING_RULES:
            raise ConfigError(f"seeding_rule must be one of {SEEDING_RULES}")
        if self.min_fight_size < 1:
            raise ConfigError("min_fight_size must be >= 1")
        if self.max_resample < 0:
            raise ConfigError("max_resample must be >= 0")


def mask_from_bools(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")


def bools_from_mask(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> k) & 1 for k in range(n)], dtype=bool)


class CompiledCircuit:
    """Dense arrays for fast stepping; built once per circuit."""

    def __init__(self, circuit: Circuit):
        roster = circuit.roster
        n, e = roster.size, len(circuit.edges)
        self.circuit = circuit
        self.n = n
        self.baseline = np.asarray(circuit.baseline, dtype=float)
        self.src = np.zeros((e, n), dtype=float)
        self.tgt = np.zeros((e, n), dtype=float)
        for k, edge in enumerate(circuit.edges):
            self.src[k, [roster.index(x) for x in edge.source]] = 1.0
            self.tgt[k, [roster.index(x) for x in edge.target]] = 1.0
        self.src_size = self.src.sum(axis=1)
        self.w = circuit.weights
        self.max_magnitude = circuit.combine == "max_magnitude"

    def join_probabilities(self, previous: np.ndarray) -> np.ndarray:
        if self.w.size == 0:
            return np.clip(self.baseline, 0.0, 1.0)
        active = (self.src @ previous.astype(float)) == self.src_size
        aw = np.where(active, self.w, 0.0)
        if self.max_magnitude:
            contrib = aw[:, None] * self.tgt
            pick = np.argmax(np.abs(contrib), axis=0)
            offset = contrib[pick, np.arange(self.n)]
        else:
            offset = aw @ self.tgt
        return np.clip(self.baseline + offset, 0.0, 1.0)


def _fallback(rule: str, n: int, rng: np.random.Generator, seed_series: FightSeries | None) -> np.ndarray:
    if rule == "empirical_first":
        if seed_series is None or seed_series.T == 0:
            raise MissingSeedSeries("empirical_first seeding needs an observed series")
        t = int(rng.integers(seed_series.T))
        return seed_series.matrix[t].copy()
    out = np.zeros(n, dtype=bool)
    out[rng.choice(n, size=min(2, n), replace=False)] = True
    return out


def _step(cc: CompiledCircuit, prev: np.ndarray, rng: np.random.Generator, min_size: int,
          max_resample: int, fallback: Callable[[], np.ndarray]) -> np.ndarray:
    q = cc.join_probabilities(prev)
    for _ in range(max_resample + 1):
        draw = rng.random(cc.n) < q
        if draw.sum() >= min_size:
            return draw
    return fallback()


def step(circuit: Circuit | CompiledCircuit, previous: FightEvent, rng: np.random.Generator,
         min_fight_size: int = 2, max_resample: int = 100, seeding_rule: str = "random_pair",
         seed_series: FightSeries | None = None, index: int | None = None) -> FightEvent:
    cc = circuit if isinstance(circuit, CompiledCircuit) else CompiledCircuit(circuit)
    prev = bools_from_mask(previous.participants, cc.n)
    row = _step(cc, prev, rng, min_fight_size, max_resample,
                lambda: _fallback(seeding_rule, cc.n, rng, seed_series))
    return FightEvent(previous.index + 1 if index is None else index, mask_from_bools(row))


def simulate(circuit: Circuit, series_for_seeding: FightSeries | None, config: SimConfig) -> FightSeries:
    if config.seeding_rule == "empirical_first":
        if series_for_seeding is None or series_for_seeding.T == 0:
            raise MissingSeedSeries("empirical_first seeding needs an observed series")
        if series_for_seeding.roster != circuit.roster:
            raise ConfigError("seeding series roster differs from the circuit roster")
    cc = CompiledCircuit(circuit)
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed) & ((1 << 64) - 1)))

    def fallback():
        return _fallback(config.seeding_rule, cc.n, rng, series_for_seeding)

    rows = np.zeros((config.n_events, cc.n), dtype=bool)
    rows[0] = fallback()
    for t in range(1, config.n_events):
        rows[t] = _step(cc, rows[t - 1], rng, config.min_fight_size, config.max_resample, fallback)
    return FightSeries.from_masks(circuit.roster, (mask_from_bools(r) for r in rows))


def planted_circuit(roster: Roster, edges: list[tuple[list[str], list[str], float]], baseline: float | list[float],
                    combine: str = "sum", name: str = "planted") -> Circuit:
    """Convenience constructor for synthetic ground-truth circuits."""
    if np.isscalar(baseline):
        base = (float(baseline),) * roster.size
    else:
        base = tuple(float(b) for b in baseline)
    cedges = tuple(CircuitEdge(tuple(sorted(s)), tuple(sorted(d)), float(w)) for s, d, w in edges)
    sizes = sorted({(len(e.source), len(e.target)) for e in cedges})
    label = f"C({sizes[0][0]},{sizes[0][1]})" if len(sizes) == 1 else ("mixed" if sizes else "C(0,0)")
    return Circuit(roster, cedges, base, combine, CircuitVariant(combine=combine), label, name)
