"""Command line entry point: ``socialcircuits <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 input/validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .circuit_builder import Circuit, CircuitVariant, build_family, default_variants
from .circuit_simulator import SEEDING_RULES, SimConfig, simulate
from .errors import CircuitError, ConfigError, InputError
from .event_store import FightSeries, filter_min_size, load_series, save_series, to_lines
from .metrics import compare, degeneracy_scan, fight_size_distribution, histogram_csv
from .null_model import NullConfig
from .pipeline import ENV_OUTPUT_DIR, ENV_WORKERS, apply_env, dump_json, load_config, run_pipeline
from .sparse_coding import (extract_groups, fit_sparse_code, groups_from_jsonl, groups_to_jsonl,
                            sparse_extract_all, sweep_K)
from .strategy_extraction import (StrategyClass, benjamini_hochberg, edges_from_jsonl, edges_to_csv,
                                  edges_to_jsonl, extract_all)
from .synthetic import default_ids, generate

log = logging.getLogger("socialcircuits")


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    return int(os.environ.get(ENV_WORKERS, "1"))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _series(args):
    s = load_series(args.input, args.input_format)
    if getattr(args, "min_size", 1) > 1:
        s = filter_min_size(s, args.min_size)
    return s


def _null_config(args) -> NullConfig:
    return NullConfig(args.permutations, args.seed, args.null_mode, _workers(args))


def _edges_text(edges, fmt: str) -> str:
    return edges_to_csv(edges) if fmt == "csv" else edges_to_jsonl(edges)


def _load_circuit(path: str, index: int = 0) -> Circuit:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "circuits" in d:
        d = d["circuits"][index]
    return Circuit.from_json(d)


def parse_variant(text: str) -> CircuitVariant:
    """``inclusion[:param]/weight_treatment[/combine]``, e.g. ``top_k:5/sign_only/max_magnitude``."""
    parts = text.split("/")
    if not 2 <= len(parts) <= 3:
        raise ConfigError(f"variant {text!r} must be inclusion/weight_treatment[/combine]")
    inc, _, param = parts[0].partition(":")
    kw = {"inclusion": inc, "weight_treatment": parts[1]}
    if len(parts) == 3:
        kw["combine"] = parts[2]
    if param:
        if inc == "top_k":
            kw["k"] = int(param)
        elif inc == "significant_only":
            kw["alpha"] = float(param)
        else:
            raise ConfigError(f"inclusion {inc!r} takes no parameter")
    return CircuitVariant(**kw)


# -- commands ----------------------------------------------------------------------


def cmd_validate(args) -> int:
    s = _series(args)
    dist = fight_size_distribution(s)
    _emit(dump_json({"T": s.T, "roster_size": s.roster.size, "roster": list(s.roster.ids),
                     "size_histogram": dist.to_json()["counts"]}), args.out)
    return 0


def cmd_extract(args) -> int:
    s = _series(args)
    edges = extract_all(s, StrategyClass.parse(args.strategy_class), _null_config(args),
                        args.min_source_count, args.disjoint)
    if args.fdr is not None:
        edges = benjamini_hochberg(edges, args.fdr)
    _emit(_edges_text(edges, args.format), args.out)
    return 0


def cmd_build(args) -> int:
    s = _series(args)
    edges = edges_from_jsonl(Path(args.edges).read_text(encoding="utf-8"))
    variants = [parse_variant(v) for v in args.variant] if args.variant else default_variants()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        family = build_family(edges, s, variants)
    for w in caught:
        log.warning("%s", w.message)
    _emit(dump_json({"circuits": [c.to_json() for c in family]}), args.out)
    return 0


def _sim_config(args, n_default: int) -> SimConfig:
    return SimConfig(args.events or n_default, args.seed, args.seeding, args.min_fight_size, args.max_resample)


def cmd_simulate(args) -> int:
    circuit = _load_circuit(args.circuit, args.index)
    seed_series = load_series(args.seed_series, args.input_format) if args.seed_series else None
    default_n = seed_series.T if seed_series is not None else 1000
    sim = simulate(circuit, seed_series, _sim_config(args, default_n))
    _emit(to_lines(sim), args.out)
    return 0


def cmd_compare(args) -> int:
    obs = load_series(args.observed, args.input_format)
    sim = load_series(args.simulated, args.input_format)
    if sim.roster != obs.roster:
        # simulated lines files only list ids that fought; widen to the observed roster when possible
        sim = FightSeries.from_sets([sim.event_members(t) for t in range(sim.T)], obs.roster)
    _emit(dump_json(compare(obs, sim).to_json()), args.out)
    if args.hist_csv:
        Path(args.hist_csv).write_text(histogram_csv(obs, sim), encoding="utf-8")
    return 0


def cmd_sparse_code(args) -> int:
    s = _series(args)
    if args.sweep:
        rows = sweep_K(s, [int(k) for k in args.sweep.split(",")], args.lam, args.max_iters, args.tol, args.seed)
        _emit(dump_json({"sweep": rows}), args.sweep_out)
    basis = fit_sparse_code(s, args.K, args.lam, args.max_iters, args.tol, args.seed)
    threshold = args.threshold if args.threshold == "otsu" else float(args.threshold)
    groups = extract_groups(basis, threshold)
    _emit(dump_json(basis.to_json()), args.out)
    if args.groups:
        Path(args.groups).write_text(groups_to_jsonl(groups), encoding="utf-8")
    else:
        sys.stderr.write(groups_to_jsonl(groups))
    return 0


def cmd_sparse_extract(args) -> int:
    s = _series(args)
    groups = groups_from_jsonl(Path(args.groups).read_text(encoding="utf-8"))
    edges = sparse_extract_all(s, groups, _null_config(args), args.max_tuple, args.min_source_count,
                               individual_targets=not args.no_individual_targets, disjoint=args.disjoint)
    _emit(_edges_text(edges, args.format), args.out)
    return 0


def cmd_degeneracy(args) -> int:
    circuit = _load_circuit(args.circuit, args.index)
    obs = load_series(args.observed, args.input_format) if args.observed else None
    default_n = obs.T if obs is not None else 1000
    rep = degeneracy_scan(circuit, obs, args.mode or ["shuffle_weights", "rescale(0.5)", "jitter(0.05)"],
                          args.n_perturbations, _sim_config(args, default_n), _workers(args))
    _emit(dump_json(rep.to_json()), args.out)
    return 0


def cmd_generate(args) -> int:
    ids = args.ids.split(",") if args.ids else default_ids(args.roster)
    series, circuit = generate(ids, args.edge or [], args.baseline, args.events, args.seed, args.min_fight_size)
    save_series(series, args.out)
    if args.circuit_out:
        Path(args.circuit_out).write_text(circuit.dumps() + "\n", encoding="utf-8")
    return 0


def cmd_pipeline(args) -> int:
    cfg = apply_env(load_config(args.config))
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.workers:
        cfg.workers = args.workers
    root = run_pipeline(cfg)
    print(root / "report.json")
    return 0


# -- parser ------------------------------------------------------------------------


def _add_input(p, positional=True):
    if positional:
        p.add_argument("input", help="fight series file")
    p.add_argument("--input-format", choices=["lines", "matrix"], default="lines")
    p.add_argument("--min-size", type=int, default=1, help="drop fights smaller than this")


def _add_null(p):
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--null-mode", choices=["monte_carlo", "exhaustive"], default="monte_carlo")
    p.add_argument("--min-source-count", type=int, default=5)
    p.add_argument("--disjoint", action="store_true", help="exclude edges whose source and target overlap")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def _add_sim(p):
    p.add_argument("--events", type=int, default=None)
    p.add_argument("--seeding", choices=SEEDING_RULES, default="empirical_first")
    p.add_argument("--min-fight-size", type=int, default=2)
    p.add_argument("--max-resample", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socialcircuits", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=None, help=f"threads (env {ENV_WORKERS})")
    common.add_argument("-o", "--out", default=None, help="output file (default stdout)")

    p = sub.add_parser("validate", parents=[common], help="summarize and check a series file")
    _add_input(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract", parents=[common], help="ΔP edges for one strategy class")
    _add_input(p)
    p.add_argument("--class", dest="strategy_class", default="1,1", help="n,m e.g. 2,1")
    p.add_argument("--fdr", type=float, default=None, help="Benjamini-Hochberg level (off by default)")
    _add_null(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build", parents=[common], help="circuit family from an edges file")
    _add_input(p)
    p.add_argument("edges", help="edges JSON lines from extract")
    p.add_argument("--variant", action="append", help="inclusion[:param]/weight_treatment[/combine]")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", parents=[common], help="generate a series from a circuit")
    p.add_argument("circuit")
    p.add_argument("--index", type=int, default=0, help="circuit index within a family file")
    p.add_argument("--seed-series", default=None, help="observed series for empirical_first seeding")
    p.add_argument("--input-format", choices=["lines", "matrix"], default="lines")
    _add_sim(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="observed vs simulated statistics")
    p.add_argument("observed")
    p.add_argument("simulated")
    p.add_argument("--input-format", choices=["lines", "matrix"], default="lines")
    p.add_argument("--hist-csv", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sparse-code", parents=[common], help="fit a non-negative sparse code")
    _add_input(p)
    p.add_argument("--K", type=int, default=12)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="default: BIC-selected")
    p.add_argument("--threshold", default="0.5", help="relative threshold or 'otsu'")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--groups", default=None, help="write groups JSON lines here")
    p.add_argument("--sweep", default=None, help="comma-separated K values to sweep")
    p.add_argument("--sweep-out", default=None)
    p.set_defaults(func=cmd_sparse_code)

    p = sub.add_parser("sparse-extract", parents=[common], help="ΔP edges between sparse groups")
    _add_input(p)
    p.add_argument("groups")
    p.add_argument("--max-tuple", type=int, default=5)
    p.add_argument("--no-individual-targets", action="store_true")
    _add_null(p)
    p.set_defaults(func=cmd_sparse_extract)

    p = sub.add_parser("degeneracy", parents=[common], help="perturbation scan of a circuit")
    p.add_argument("circuit")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--observed", default=None)
    p.add_argument("--input-format", choices=["lines", "matrix"], default="lines")
    p.add_argument("--mode", action="append", help="shuffle_weights | rescale(f) | jitter(sigma)")
    p.add_argument("--n-perturbations", type=int, default=10)
    _add_sim(p)
    p.set_defaults(func=cmd_degeneracy)

    p = sub.add_parser("generate", parents=[common], help="synthetic data from a planted circuit")
    p.add_argument("--roster", type=int, default=10)
    p.add_argument("--ids", default=None, help="comma-separated ids (overrides --roster)")
    p.add_argument("--edge", action="append", help="planted edge SRC+SRC>DST:weight")
    p.add_argument("--baseline", type=float, default=0.2)
    p.add_argument("--events", type=int, default=2000)
    p.add_argument("--min-fight-size", type=int, default=2)
    p.add_argument("--circuit-out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pipeline", help="full run from a YAML/JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--output-dir", default=None, help=f"override output_dir (env {ENV_OUTPUT_DIR})")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "generate" and not args.out:
        parser.error("generate needs -o/--out")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        log.error("%s", exc)
        return 2
    except CircuitError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
