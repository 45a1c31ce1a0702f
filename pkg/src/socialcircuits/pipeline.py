"""End-to-end run driven by a single config file.

validate -> extract -> build -> simulate/rank -> compare -> sparse -> degeneracy -> report

All randomness comes from ``master_seed`` through labeled derivation, and all
artifacts are written with stable formatting, so the manifest of content
hashes is identical for identical configs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .circuit_builder import Circuit, CircuitVariant, build_family, default_variants, null_circuit
from .circuit_simulator import SimConfig, simulate
from .errors import ConfigError
from .event_store import filter_min_size, load_series, participation_counts, save_series
from .metrics import (compare, degeneracy_scan, fight_size_distribution, histogram_csv, rank_family,
                      replicate_seed)
from .null_model import NullConfig
from .seeding import derive_seed
from .sparse_coding import (extract_groups, fit_sparse_code, groups_to_jsonl, sparse_candidate_count,
                            sparse_extract_all)
from .strategy_extraction import (StrategyClass, benjamini_hochberg, candidate_edge_count, class_enrichment,
                                  edges_to_csv, edges_to_jsonl, extract_all)

log = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "SOCIALCIRCUITS_OUTPUT_DIR"
ENV_WORKERS = "SOCIALCIRCUITS_WORKERS"


@dataclass
class NullSettings:
    n_permutations: int = 1000
    mode: str = "monte_carlo"


@dataclass
class SimSettings:
    n_events: int | None = None
    seeding_rule: str = "empirical_first"
    min_fight_size: int = 2
    max_resample: int = 100
    replicates: int = 5


@dataclass
class SparseSettings:
    enabled: bool = True
    K: int = 12
    lam: float | None = None
    threshold: Any = 0.5
    max_tuple: int = 5
    max_iters: int = 500
    tol: float = 1e-7


@dataclass
class DegeneracySettings:
    enabled: bool = True
    modes: list[str] = field(default_factory=lambda: ["shuffle_weights", "rescale(0.5)", "jitter(0.05)"])
    n_perturbations: int = 10
    circuit_class: str = "C(2,1)"


@dataclass
class RunConfig:
    input_path: str
    output_dir: str = "run"
    input_format: str = "lines"
    master_seed: int = 0
    workers: int = 1
    min_size: int = 1
    classes: list[str] = field(default_factory=lambda: ["1,1", "2,1", "1,2"])
    min_source_count: int = 5
    disjoint: bool = False
    significance_level: float = 0.05
    fdr: float | None = None
    null_model: NullSettings = field(default_factory=NullSettings)
    variants: list[dict] = field(default_factory=lambda: [v.to_dict() for v in default_variants()])
    extra_circuits: list[str] = field(default_factory=list)
    sim: SimSettings = field(default_factory=SimSettings)
    sparse: SparseSettings = field(default_factory=SparseSettings)
    degeneracy: DegeneracySettings = field(default_factory=DegeneracySettings)
    plots: bool = False
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        d = dict(d)
        nested = {"null_model": NullSettings, "sim": SimSettings, "sparse": SparseSettings,
                  "degeneracy": DegeneracySettings}
        for key, typ in nested.items():
            sub = dict(d.get(key) or {})
            if key == "sparse" and "lambda" in sub:
                sub["lam"] = sub.pop("lambda")
            _reject_unknown(typ, sub, key)
            d[key] = typ(**sub)
        _reject_unknown(cls, d, "config")
        if "input_path" not in d:
            raise ConfigError("config needs input_path")
        cfg = cls(**d)
        if base_dir is not None:
            cfg.base_dir = str(base_dir)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        NullConfig(self.null_model.n_permutations, self.master_seed, self.null_model.mode, self.workers)
        for c in self.classes:
            StrategyClass.parse(c)
        for v in self.variants:
            CircuitVariant.from_dict(v)
        if self.sim.replicates < 1:
            raise ConfigError("sim.replicates must be >= 1")
        SimConfig(self.sim.n_events or 1, 0, self.sim.seeding_rule, self.sim.min_fight_size, self.sim.max_resample)
        if self.min_source_count < 1:
            raise ConfigError("min_source_count must be >= 1")
        if not 0 < self.significance_level <= 1:
            raise ConfigError("significance_level must be in (0, 1]")
        if self.sparse.K < 1:
            raise ConfigError("sparse.K must be >= 1")
        if self.degeneracy.n_perturbations < 1:
            raise ConfigError("degeneracy.n_perturbations must be >= 1")
        if self.input_format not in ("lines", "matrix"):
            raise ConfigError("input_format must be lines or matrix")

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["base_dir"], d["output_dir"], d["workers"]
        d["sparse"]["lambda"] = d["sparse"].pop("lam")
        return d


def _reject_unknown(typ, d: dict, where: str) -> None:
    known = {f.name for f in fields(typ)}
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return RunConfig.from_dict(raw, base_dir=path.parent)


def apply_env(cfg: RunConfig) -> RunConfig:
    if os.environ.get(ENV_OUTPUT_DIR):
        cfg = replace(cfg, output_dir=os.environ[ENV_OUTPUT_DIR])
    if os.environ.get(ENV_WORKERS):
        cfg = replace(cfg, workers=int(os.environ[ENV_WORKERS]))
    return cfg


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def class_slug(label: str) -> str:
    return label.replace("(", "").replace(")", "").replace(",", "_")


class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def text(self, name: str, content: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(content, encoding="utf-8")
        self.files.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        return self.text(name, dump_json(obj))

    def register(self, name: str) -> None:
        self.files.append(name)

    def manifest(self) -> dict:
        out = {}
        for name in sorted(set(self.files)):
            out[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        return {"files": out}


def run_pipeline(cfg: RunConfig) -> Path:
    cfg.validate()
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    out = _Writer(root)
    out.json("config.json", cfg.to_dict())
    master = cfg.master_seed

    base = Path(cfg.base_dir)
    series = load_series(_resolve(base, cfg.input_path), cfg.input_format)
    if cfg.min_size > 1:
        series = filter_min_size(series, cfg.min_size)
    sizes = fight_size_distribution(series)
    out.json("validate.json", {"T": series.T, "roster_size": series.roster.size,
                               "size_histogram": sizes.to_json()["counts"],
                               "participation": participation_counts(series)})
    report: dict[str, Any] = {"T": series.T, "roster_size": series.roster.size, "classes": {}}

    edges_by_class = {}
    for text in cfg.classes:
        cls = StrategyClass.parse(text)
        null_cfg = NullConfig(cfg.null_model.n_permutations, derive_seed(master, "null_model", cls.label),
                              cfg.null_model.mode, cfg.workers)
        edges = extract_all(series, cls, null_cfg, cfg.min_source_count, cfg.disjoint)
        if cfg.fdr is not None:
            edges = benjamini_hochberg(edges, cfg.fdr)
        slug = class_slug(cls.label)
        out.text(f"edges_{slug}.jsonl", edges_to_jsonl(edges))
        out.text(f"edges_{slug}.csv", edges_to_csv(edges))
        enr = class_enrichment(series, cls, cfg.significance_level, null_cfg, edges=edges)
        report["classes"][cls.label] = {
            "candidate_edges": candidate_edge_count(series.roster.size, cls),
            "tested_edges": len(edges),
            "enrichment": asdict(enr),
        }
        edges_by_class[cls.label] = edges
        log.info("%s: %d edges", cls.label, len(edges))

    variants = [CircuitVariant.from_dict(v) for v in cfg.variants]
    circuits: list[Circuit] = [null_circuit(series)]
    for label, edges in edges_by_class.items():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fam = build_family(edges, series, variants, class_label=label)
        report["classes"][label]["empty_variants"] = [str(w.message) for w in caught]
        circuits.extend(fam)
    for path in (_resolve(base, p) for p in cfg.extra_circuits):
        c = Circuit.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
        if c.roster != series.roster:
            raise ConfigError(f"extra circuit {path} roster differs from the input roster")
        circuits.append(replace(c, name=c.name or Path(path).stem))
    out.json("family.json", {"circuits": [c.to_json() for c in circuits]})

    sim_cfg = SimConfig(cfg.sim.n_events or series.T, derive_seed(master, "circuit_simulator", "rank"),
                        cfg.sim.seeding_rule, cfg.sim.min_fight_size, cfg.sim.max_resample)
    ranked = rank_family(series, circuits, sim_cfg, cfg.sim.replicates, cfg.workers)
    out.json("ranking.json", {"ranking": [r.to_json() for r in ranked]})
    best = ranked[0]
    best_sim = simulate(best.circuit, series, replace(sim_cfg, seed=replicate_seed(sim_cfg.seed, 0)))
    save_series(best_sim, root / "best_simulated.txt")
    out.register("best_simulated.txt")
    out.text("histogram_best.csv", histogram_csv(series, best_sim))
    out.json("comparison_best.json", compare(series, best_sim).to_json())
    report["ranking"] = [r.to_json() for r in ranked]
    report["best"] = best.circuit.label

    if cfg.sparse.enabled:
        basis = fit_sparse_code(series, cfg.sparse.K, cfg.sparse.lam, cfg.sparse.max_iters, cfg.sparse.tol,
                                derive_seed(master, "sparse_coding", "fit"))
        groups = extract_groups(basis, cfg.sparse.threshold)
        out.json("sparse_basis.json", basis.to_json())
        out.text("sparse_groups.jsonl", groups_to_jsonl(groups))
        sreport = {"K": basis.K, "lambda": basis.lam, "reconstruction_error": basis.reconstruction_error,
                   "converged": basis.converged, "n_groups": len(groups),
                   "candidate_edges": sparse_candidate_count(len(groups), series.roster.size)}
        if groups:
            null_cfg = NullConfig(cfg.null_model.n_permutations, derive_seed(master, "null_model", "sparse"),
                                  cfg.null_model.mode, cfg.workers)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sedges = sparse_extract_all(series, groups, null_cfg, cfg.sparse.max_tuple, cfg.min_source_count,
                                            disjoint=cfg.disjoint)
            out.text("sparse_edges.jsonl", edges_to_jsonl(sedges))
            sreport["tested_edges"] = len(sedges)
            sreport["significant_edges"] = sum(1 for e in sedges if e.p_value <= cfg.significance_level)
        report["sparse"] = sreport

    if cfg.degeneracy.enabled:
        pool = [r for r in ranked if r.circuit.class_label == cfg.degeneracy.circuit_class and r.circuit.edges]
        pool = pool or [r for r in ranked if r.circuit.edges]
        if pool:
            ref = pool[0].circuit
            deg = degeneracy_scan(ref, series, cfg.degeneracy.modes, cfg.degeneracy.n_perturbations,
                                  replace(sim_cfg, seed=derive_seed(master, "degeneracy")), cfg.workers)
            out.json("degeneracy.json", {"reference": ref.label, **deg.to_json()})
            report["degeneracy"] = {"reference": ref.label, "floor_median": deg.floor_median,
                                    "median_by_mode": {m: deg.median(m) for m in deg.per_mode}}

    if cfg.plots:
        from .plots import edge_bar_svg, size_overlay_svg

        size_overlay_svg(series, best_sim, root / "plots" / "size_distribution.svg")
        out.register("plots/size_distribution.svg")
        first = next((e for e in edges_by_class.values() if e), None)
        if first:
            edge_bar_svg(first, root / "plots" / "edge_magnitudes.svg")
            out.register("plots/edge_magnitudes.svg")

    out.json("report.json", report)
    (root / "manifest.json").write_text(dump_json(out.manifest()), encoding="utf-8")
    return root
