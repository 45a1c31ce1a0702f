"""Time-permutation null model.

Surrogates reorder whole events and never touch who was in them.  Each
permutation draws from its own stream keyed by ``(master_seed, perm_index)``
and the accumulators are integer sums, so results do not depend on the
number of worker threads or the order chunks finish in.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigError, EmptySeries, ExhaustiveTooLarge
from .event_store import FightSeries, tuple_indicator
from .seeding import MASK64

EXHAUSTIVE_CAP = 10**6
MODES = ("monte_carlo", "exhaustive")

Tuple_ = tuple[str, ...]


@dataclass(frozen=True)
class NullConfig:
    n_permutations: int = 1000
    master_seed: int = 0
    mode: str = "monte_carlo"
    workers: int = 1

    def __post_init__(self):
        if int(self.n_permutations) < 1:
            raise ConfigError("n_permutations must be a positive integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")


def check_exhaustive(T: int) -> None:
    if math.factorial(T) > EXHAUSTIVE_CAP:
        raise ExhaustiveTooLarge(f"{T}! orderings exceed the exhaustive cap of {EXHAUSTIVE_CAP}")


def permutation_order(T: int, perm_index: int, master_seed: int) -> np.ndarray:
    seq = np.random.SeedSequence([int(master_seed) & MASK64, int(perm_index)])
    return np.random.default_rng(seq).permutation(T)


def permute_series(series: FightSeries, perm_index: int, master_seed: int) -> FightSeries:
    if series.T == 0:
        raise EmptySeries("cannot permute an empty series")
    order = permutation_order(series.T, perm_index, master_seed)
    masks = series.masks
    return series.with_masks(masks[k] for k in order)


def tuple_key(src: Sequence[str], dst: Sequence[str]) -> str:
    return "+".join(sorted(src)) + "|" + "+".join(sorted(dst))


class FollowCounter:
    """Follow counts ``N(j_t | i_{t-1})`` for every (source, target) tuple pair.

    Counting for an ordering is ``S.T @ next(Tg)`` where ``S``/``Tg`` are the
    event-by-tuple containment indicators and ``next`` moves each event's
    target row onto its predecessor in the ordering.
    """

    def __init__(self, series: FightSeries, source_masks: Sequence[int], target_masks: Sequence[int]):
        roster = series.roster
        self.T = series.T
        src_w = np.array([roster.mask_words(m) for m in source_masks], dtype=np.uint64).reshape(-1, roster.n_words)
        dst_w = np.array([roster.mask_words(m) for m in target_masks], dtype=np.uint64).reshape(-1, roster.n_words)
        self.source_ind = tuple_indicator(series.words, src_w)
        self.target_ind = tuple_indicator(series.words, dst_w)
        self._S_T = sparse.csr_matrix(self.source_ind.T.astype(np.float64))
        self._Tg = self.target_ind.astype(np.float64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.source_ind.shape[1], self.target_ind.shape[1]

    def counts(self, order: np.ndarray) -> np.ndarray:
        nxt = np.zeros_like(self._Tg)
        nxt[order[:-1]] = self._Tg[order[1:]]
        return np.rint(self._S_T @ nxt).astype(np.int64)

    def counts_batch(self, orders: np.ndarray) -> np.ndarray:
        """Dense batched variant for small ``T``; returns ``(B, Ns, Nt)``."""
        S = self.source_ind.astype(np.float64)
        prev = S[orders[:, :-1]]
        nxt = self._Tg[orders[:, 1:]]
        return np.rint(np.einsum("bti,btj->bij", prev, nxt)).astype(np.int64)

    def observed(self) -> np.ndarray:
        return self.counts(np.arange(self.T))


@dataclass
class NullArrays:
    observed: np.ndarray
    total: np.ndarray
    total_sq: np.ndarray
    n_ge: np.ndarray
    n_le: np.ndarray
    n_permutations: int

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.n_permutations

    @property
    def variance(self) -> np.ndarray:
        m = self.mean
        return np.maximum(self.total_sq / self.n_permutations - m * m, 0.0)


def _zero_acc(shape):
    return [np.zeros(shape, dtype=np.int64) for _ in range(4)]


def _add(acc, c, obs):
    acc[0] += c
    acc[1] += c * c
    acc[2] += c >= obs
    acc[3] += c <= obs


def _mc_chunk(counter: FollowCounter, obs, indices: range, master_seed: int):
    acc = _zero_acc(obs.shape)
    for k in indices:
        _add(acc, counter.counts(permutation_order(counter.T, k, master_seed)), obs)
    return acc


def _exhaustive(counter: FollowCounter, obs, batch: int = 2048):
    acc = _zero_acc(obs.shape)
    perms = itertools.permutations(range(counter.T))
    n = 0
    while True:
        block = list(itertools.islice(perms, batch))
        if not block:
            break
        n += len(block)
        cs = counter.counts_batch(np.array(block, dtype=np.intp))
        acc[0] += cs.sum(axis=0)
        acc[1] += (cs * cs).sum(axis=0)
        acc[2] += (cs >= obs).sum(axis=0)
        acc[3] += (cs <= obs).sum(axis=0)
    return acc, n


def null_arrays(series: FightSeries, source_masks: Sequence[int], target_masks: Sequence[int],
                config: NullConfig) -> NullArrays:
    """Observed follow counts plus permutation accumulators over a source x target grid."""
    if series.T == 0:
        raise EmptySeries("null model needs at least one event")
    counter = FollowCounter(series, source_masks, target_masks)
    obs = counter.observed()
    if config.mode == "exhaustive":
        check_exhaustive(series.T)
        acc, n = _exhaustive(counter, obs)
    else:
        n = int(config.n_permutations)
        workers = min(int(config.workers), n)
        bounds = np.linspace(0, n, workers + 1).astype(int)
        chunks = [range(bounds[w], bounds[w + 1]) for w in range(workers)]
        if workers == 1:
            parts = [_mc_chunk(counter, obs, chunks[0], config.master_seed)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda r: _mc_chunk(counter, obs, r, config.master_seed), chunks))
        acc = _zero_acc(obs.shape)
        for part in parts:
            for a, b in zip(acc, part):
                a += b
    return NullArrays(obs, acc[0], acc[1], acc[2], acc[3], n)


@dataclass
class NullStats:
    """Null expectations per (source-tuple, target-tuple) pair.

    Besides the mean and variance this keeps the observed count and how many
    permutations landed at or above / at or below it, which is what the
    empirical p-value needs.
    """

    mean_follow_count: dict[tuple[Tuple_, Tuple_], float]
    variance: dict[tuple[Tuple_, Tuple_], float]
    n_permutations_used: int
    observed: dict[tuple[Tuple_, Tuple_], int] = field(default_factory=dict)
    n_ge: dict[tuple[Tuple_, Tuple_], int] = field(default_factory=dict)
    n_le: dict[tuple[Tuple_, Tuple_], int] = field(default_factory=dict)

    def __contains__(self, key) -> bool:
        return key in self.mean_follow_count

    def to_json(self) -> dict:
        out = {}
        for key in sorted(self.mean_follow_count):
            src, dst = key
            out[tuple_key(src, dst)] = {
                "mean": self.mean_follow_count[key],
                "variance": self.variance[key],
                "observed": self.observed.get(key),
                "n_ge": self.n_ge.get(key),
                "n_le": self.n_le.get(key),
            }
        return {"n_permutations": self.n_permutations_used, "pairs": out}


def canonical(t: Iterable[str]) -> Tuple_:
    return tuple(sorted(set(t)))


def null_stats(series: FightSeries, tuples: Sequence[tuple[Iterable[str], Iterable[str]]],
               config: NullConfig) -> NullStats:
    if not tuples:
        raise ConfigError("null_stats needs at least one (source, target) pair")
    pairs = [(canonical(s), canonical(d)) for s, d in tuples]
    srcs = sorted({s for s, _ in pairs})
    dsts = sorted({d for _, d in pairs})
    si = {s: k for k, s in enumerate(srcs)}
    di = {d: k for k, d in enumerate(dsts)}
    roster = series.roster
    arr = null_arrays(series, [roster.mask(s) for s in srcs], [roster.mask(d) for d in dsts], config)
    mean, var = arr.mean, arr.variance
    stats = NullStats({}, {}, arr.n_permutations)
    for key in pairs:
        a, b = si[key[0]], di[key[1]]
        stats.mean_follow_count[key] = float(mean[a, b])
        stats.variance[key] = float(var[a, b])
        stats.observed[key] = int(arr.observed[a, b])
        stats.n_ge[key] = int(arr.n_ge[a, b])
        stats.n_le[key] = int(arr.n_le[a, b])
    return stats
