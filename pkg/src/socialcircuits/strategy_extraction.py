"""Delta-P strategic edges between participation tuples.

ΔP(i -> j) = (N(j_t | i_{t-1}) - N_null(j_t | i_{t-1})) / N(i)

Tuples are unordered sets of roster ids, canonicalized as sorted tuples.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, NoObservations
from .event_store import FightSeries, tuple_indicator
from .null_model import NullArrays, NullConfig, NullStats, canonical, null_arrays

MAX_TUPLE = 5


@dataclass(frozen=True, order=True)
class StrategyClass:
    n: int
    m: int

    def __post_init__(self):
        if not (1 <= self.n <= MAX_TUPLE and 1 <= self.m <= MAX_TUPLE):
            raise ConfigError(f"strategy class sizes must be in 1..{MAX_TUPLE}, got ({self.n},{self.m})")

    @classmethod
    def parse(cls, text: str) -> "StrategyClass":
        s = text.strip().upper().removeprefix("C").strip("()")
        try:
            n, m = (int(x) for x in s.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse strategy class {text!r}") from None
        return cls(n, m)

    @property
    def label(self) -> str:
        return f"C({self.n},{self.m})"


@dataclass(frozen=True)
class DeltaPEdge:
    """One ΔP edge with its null statistics.

    ``delta_p <= 1`` always.  It is ``>= -1`` unless the source is in the final
    event: N(i) skips that event, but a shuffle can move it earlier, so the null
    mean can exceed N(i) by less than one and ΔP dips just below -1.
    Circuit building clips weights back into [-1, 1].
    """

    source: tuple[str, ...]
    target: tuple[str, ...]
    delta_p: float
    n_source: int
    n_follow: int
    null_mean: float
    null_std: float
    z_score: float
    p_value: float

    def sort_key(self):
        return (-abs(self.delta_p), self.source, self.target)

    def to_dict(self) -> dict:
        return {
            "src": list(self.source),
            "dst": list(self.target),
            "dp": self.delta_p,
            "n_src": self.n_source,
            "n_follow": self.n_follow,
            "null_mean": self.null_mean,
            "null_std": self.null_std,
            "z": self.z_score,
            "p": self.p_value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeltaPEdge":
        return cls(tuple(d["src"]), tuple(d["dst"]), float(d["dp"]), int(d["n_src"]), int(d["n_follow"]),
                   float(d["null_mean"]), float(d["null_std"]), float(d["z"]), float(d["p"]))


@dataclass(frozen=True)
class EnrichmentReport:
    observed_significant: int
    expected_significant: float
    ratio: float
    n_tested: int


def _check(series: FightSeries, t: Iterable[str]) -> int:
    return series.roster.mask(canonical(t))


def source_count(series: FightSeries, i: Sequence[str]) -> int:
    mask = _check(series, i)
    return sum(1 for m in series.masks[:-1] if m & mask == mask)


def follow_count(series: FightSeries, i: Sequence[str], j: Sequence[str]) -> int:
    mi, mj = _check(series, i), _check(series, j)
    ms = series.masks
    return sum(1 for a, b in zip(ms, ms[1:]) if a & mi == mi and b & mj == mj)


def empirical_p(n_ge: int, n_le: int, k: int) -> float:
    """Two-sided permutation p-value with add-one smoothing."""
    return min(1.0, 2.0 * (min(int(n_ge), int(n_le)) + 1) / (int(k) + 1))


def _edge(src, dst, n_src, n_follow, mean, var, n_ge, n_le, k) -> DeltaPEdge:
    if n_src <= 0:
        raise NoObservations(f"source {src} never occurs before the last event")
    std = math.sqrt(var)
    dp = (n_follow - mean) / n_src
    z = (n_follow - mean) / std if std > 0 else 0.0
    return DeltaPEdge(tuple(src), tuple(dst), float(dp), int(n_src), int(n_follow), float(mean),
                      float(std), float(z), empirical_p(n_ge, n_le, k))


def delta_p(series: FightSeries, i: Sequence[str], j: Sequence[str], null: NullStats) -> DeltaPEdge:
    key = (canonical(i), canonical(j))
    if key not in null:
        raise KeyError(f"null statistics missing pair {key}")
    n_src = source_count(series, key[0])
    n_follow = follow_count(series, key[0], key[1])
    return _edge(key[0], key[1], n_src, n_follow, null.mean_follow_count[key], null.variance[key],
                 null.n_ge[key], null.n_le[key], null.n_permutations_used)


# -- enumeration ---------------------------------------------------------------


def _subset_counts(masks: Sequence[int], size: int, roster_size: int) -> Counter:
    """How many of ``masks`` contain each ``size``-subset (as a bitmask)."""
    counts: Counter = Counter()
    for m in masks:
        bits = [k for k in range(roster_size) if m >> k & 1]
        if len(bits) < size:
            continue
        for combo in combinations(bits, size):
            counts[sum(1 << k for k in combo)] += 1
    return counts


def candidate_sources(series: FightSeries, n: int, min_source_count: int) -> list[int]:
    if series.T < 2:
        return []
    counts = _subset_counts(series.masks[:-1], n, series.roster.size)
    return [m for m, c in counts.items() if c >= min_source_count]


def candidate_targets(series: FightSeries, m: int) -> list[int]:
    if m == 1:
        return [1 << k for k in range(series.roster.size)]
    return list(_subset_counts(series.masks[1:], m, series.roster.size))


def candidate_edge_count(roster_size: int, cls: StrategyClass) -> int:
    """All (n-tuple, m-tuple) pairs over the roster before any filtering."""
    return math.comb(roster_size, cls.n) * math.comb(roster_size, cls.m)


def _source_counts(series: FightSeries, source_masks: Sequence[int]) -> np.ndarray:
    roster = series.roster
    words = np.array([roster.mask_words(m) for m in source_masks], dtype=np.uint64).reshape(-1, roster.n_words)
    return tuple_indicator(series.words[:-1], words).sum(axis=0)


def edges_from_grid(series: FightSeries, source_masks: Sequence[int], target_masks: Sequence[int],
                    null_config: NullConfig, disjoint: bool = False) -> list[DeltaPEdge]:
    """ΔP for every source x target pair, sorted by |ΔP| descending then lexicographically."""
    if not source_masks or not target_masks:
        return []
    roster = series.roster
    arr: NullArrays = null_arrays(series, source_masks, target_masks, null_config)
    mean, var = arr.mean, arr.variance
    src_ids = [roster.members(m) for m in source_masks]
    dst_ids = [roster.members(m) for m in target_masks]
    n_src = _source_counts(series, source_masks)
    edges = []
    for a, sm in enumerate(source_masks):
        for b, dm in enumerate(target_masks):
            if disjoint and sm & dm:
                continue
            edges.append(_edge(src_ids[a], dst_ids[b], n_src[a], arr.observed[a, b], mean[a, b], var[a, b],
                               arr.n_ge[a, b], arr.n_le[a, b], arr.n_permutations))
    edges.sort(key=DeltaPEdge.sort_key)
    return edges


def extract_all(series: FightSeries, cls: StrategyClass, null_config: NullConfig,
                min_source_count: int = 5, disjoint: bool = False) -> list[DeltaPEdge]:
    if min_source_count < 1:
        raise ConfigError("min_source_count must be >= 1")
    sources = sorted(candidate_sources(series, cls.n, min_source_count), key=series.roster.members)
    targets = sorted(candidate_targets(series, cls.m), key=series.roster.members)
    return edges_from_grid(series, sources, targets, null_config, disjoint=disjoint)


def class_enrichment(series: FightSeries, cls: StrategyClass, significance_level: float,
                     null_config: NullConfig, min_source_count: int = 5,
                     edges: list[DeltaPEdge] | None = None) -> EnrichmentReport:
    if not 0 < significance_level <= 1:
        raise ConfigError("significance_level must be in (0, 1]")
    if edges is None:
        edges = extract_all(series, cls, null_config, min_source_count)
    observed = sum(1 for e in edges if e.p_value <= significance_level)
    expected = significance_level * len(edges)
    ratio = observed / expected if expected > 0 else float("nan")
    return EnrichmentReport(observed, expected, ratio, len(edges))


def benjamini_hochberg(edges: list[DeltaPEdge], q: float) -> list[DeltaPEdge]:
    """Keep edges that survive BH false-discovery control at level ``q``."""
    if not edges:
        return []
    from scipy.stats import false_discovery_control

    adjusted = false_discovery_control(np.array([e.p_value for e in edges]), method="bh")
    return [e for e, a in zip(edges, adjusted) if a <= q]


# -- serialization ---------------------------------------------------------------

COLUMNS = ["src", "dst", "dp", "n_src", "n_follow", "null_mean", "null_std", "z", "p"]


def edges_to_jsonl(edges: Iterable[DeltaPEdge]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in edges)


def edges_to_csv(edges: Iterable[DeltaPEdge]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for e in edges:
        d = e.to_dict()
        d["src"] = "+".join(d["src"])
        d["dst"] = "+".join(d["dst"])
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in COLUMNS])
    return buf.getvalue()


def edges_from_jsonl(text: str) -> list[DeltaPEdge]:
    return [DeltaPEdge.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
