"""Observed-vs-simulated comparison, family ranking and the degeneracy scan."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit_builder import Circuit, Perturbation, perturb_circuit
from .circuit_simulator import SimConfig, simulate
from .errors import ConfigError, RosterMismatch
from .event_store import FightSeries
from .seeding import derive_seed


@dataclass(frozen=True)
class FightSizeDistribution:
    counts: dict[int, int]
    total: int

    @property
    def probabilities(self) -> dict[int, float]:
        if self.total == 0:
            return {}
        return {s: c / self.total for s, c in self.counts.items()}

    def to_json(self) -> dict:
        return {"total": self.total, "counts": {str(s): c for s, c in sorted(self.counts.items())}}


@dataclass(frozen=True)
class ComparisonReport:
    ks_statistic: float
    js_divergence: float
    per_individual_rate_rmse: float
    pair_cooccurrence_rmse: float

    def to_json(self) -> dict:
        return asdict(self)


def fight_size_distribution(series: FightSeries) -> FightSizeDistribution:
    sizes, counts = np.unique(series.sizes(), return_counts=True)
    return FightSizeDistribution({int(s): int(c) for s, c in zip(sizes, counts)}, series.T)


def _aligned(p: FightSizeDistribution, q: FightSizeDistribution):
    support = sorted(set(p.counts) | set(q.counts))
    pp, qq = p.probabilities, q.probabilities
    return support, np.array([pp.get(s, 0.0) for s in support]), np.array([qq.get(s, 0.0) for s in support])


def ks_statistic(p: FightSizeDistribution, q: FightSizeDistribution) -> float:
    if p.total == 0 or q.total == 0:
        return 0.0 if p.total == q.total else 1.0
    _, a, b = _aligned(p, q)
    return float(np.max(np.abs(np.cumsum(a) - np.cumsum(b))))


def js_divergence(p: FightSizeDistribution, q: FightSizeDistribution) -> float:
    """Jensen-Shannon divergence in bits; 0 for identical, 1 for disjoint supports."""
    if p.total == 0 or q.total == 0:
        return 0.0 if p.total == q.total else 1.0
    _, a, b = _aligned(p, q)
    m = 0.5 * (a + b)

    def kl(x):
        nz = x > 0
        return float(np.sum(x[nz] * np.log2(x[nz] / m[nz])))

    return max(0.0, 0.5 * kl(a) + 0.5 * kl(b))


def _rates(series: FightSeries) -> np.ndarray:
    if series.T == 0:
        return np.zeros(series.roster.size)
    return series.matrix.mean(axis=0)


def _pair_freq(series: FightSeries) -> np.ndarray:
    n = series.roster.size
    if series.T == 0 or n < 2:
        return np.zeros(n * (n - 1) // 2)
    X = series.matrix.astype(float)
    co = X.T @ X / series.T
    return co[np.triu_indices(n, k=1)]


def _rmse(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((a - b) ** 2)))


def compare(observed: FightSeries, simulated: FightSeries) -> ComparisonReport:
    if observed.roster != simulated.roster:
        raise RosterMismatch("observed and simulated series use different rosters")
    p, q = fight_size_distribution(observed), fight_size_distribution(simulated)
    return ComparisonReport(
        ks_statistic(p, q),
        js_divergence(p, q),
        _rmse(_rates(observed), _rates(simulated)),
        _rmse(_pair_freq(observed), _pair_freq(simulated)),
    )


def mean_report(reports: Sequence[ComparisonReport]) -> ComparisonReport:
    arr = np.array([[r.ks_statistic, r.js_divergence, r.per_individual_rate_rmse, r.pair_cooccurrence_rmse]
                    for r in reports])
    return ComparisonReport(*(float(x) for x in arr.mean(axis=0)))


def histogram_csv(observed: FightSeries, simulated: FightSeries) -> str:
    p, q = fight_size_distribution(observed), fight_size_distribution(simulated)
    support, a, b = _aligned(p, q)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "observed_prob", "simulated_prob"])
    for s, x, y in zip(support, a, b):
        w.writerow([s, repr(float(x)), repr(float(y))])
    return buf.getvalue()


# -- ranking ---------------------------------------------------------------------


@dataclass
class RankedCircuit:
    circuit: Circuit
    report: ComparisonReport
    position: int
    replicate_reports: list[ComparisonReport] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"label": self.circuit.label, "input_position": self.position,
                "n_edges": len(self.circuit.edges), "mean_report": self.report.to_json()}


def replicate_seed(master: int, r: int) -> int:
    return derive_seed(master, "metrics", "replicate", r)


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rank_family(observed: FightSeries, circuits: Sequence[Circuit], sim_config: SimConfig,
                replicates: int = 5, workers: int = 1) -> list[RankedCircuit]:
    """Rank circuits by mean JS divergence to the observed sizes (KS breaks ties).

    Replicate ``r`` uses the same derived seed for every circuit, so two
    identical circuits get identical reports and keep their input order.
    """
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    jobs = [(c_idx, r) for c_idx in range(len(circuits)) for r in range(replicates)]

    def run(job):
        c_idx, r = job
        cfg = replace(sim_config, seed=replicate_seed(sim_config.seed, r))
        return compare(observed, simulate(circuits[c_idx], observed, cfg))

    results = _pmap(run, jobs, workers)
    ranked = []
    for c_idx, circuit in enumerate(circuits):
        reps = results[c_idx * replicates:(c_idx + 1) * replicates]
        ranked.append(RankedCircuit(circuit, mean_report(reps), c_idx, reps))
    ranked.sort(key=lambda rc: (rc.report.js_divergence, rc.report.ks_statistic, rc.position))
    return ranked


# -- degeneracy ------------------------------------------------------------------


@dataclass
class DegeneracyReport:
    """JS divergences of perturbed-circuit output from the reference output.

    ``floor`` holds the same-circuit / different-seed divergences: replicate
    ``k`` of every mode is simulated with the same seed as ``floor[k]``.
    """

    floor: list[float]
    per_mode: dict[str, list[float]]

    @property
    def floor_median(self) -> float:
        return float(np.median(self.floor))

    def median(self, mode: str) -> float:
        return float(np.median(self.per_mode[mode]))

    def to_json(self) -> dict:
        return {
            "floor": self.floor,
            "floor_median": self.floor_median,
            "per_mode": {m: {"divergences": v, "median": float(np.median(v)),
                             "median_over_floor": _ratio(float(np.median(v)), self.floor_median)}
                         for m, v in self.per_mode.items()},
        }


def _ratio(a: float, b: float) -> float | None:
    return a / b if b > 0 else None


def degeneracy_scan(reference: Circuit, observed: FightSeries | None, modes: Sequence[Perturbation | str],
                    n_perturbations: int, sim_config: SimConfig, workers: int = 1) -> DegeneracyReport:
    if n_perturbations < 1:
        raise ConfigError("n_perturbations must be >= 1")
    modes = [m if isinstance(m, Perturbation) else Perturbation.parse(m) for m in modes]
    master = sim_config.seed
    ref_cfg = replace(sim_config, seed=derive_seed(master, "degeneracy", "reference"))
    ref_dist = fight_size_distribution(simulate(reference, observed, ref_cfg))

    def seed_k(k):
        return derive_seed(master, "degeneracy", "replicate", k)

    def divergence(job):
        mode, k = job
        circuit = reference if mode is None else perturb_circuit(
            reference, mode, derive_seed(master, "degeneracy", "perturb", mode.label, k))
        sim = simulate(circuit, observed, replace(sim_config, seed=seed_k(k)))
        return js_divergence(ref_dist, fight_size_distribution(sim))

    jobs = [(None, k) for k in range(n_perturbations)]
    jobs += [(m, k) for m in modes for k in range(n_perturbations)]
    values = _pmap(divergence, jobs, workers)
    floor = values[:n_perturbations]
    per_mode = {}
    for i, m in enumerate(modes):
        lo = n_perturbations * (i + 1)
        per_mode[m.label] = values[lo:lo + n_perturbations]
    return DegeneracyReport(floor, per_mode)
