"""Circuit families built from measured ΔP edges.

A family varies two things: which edges are kept (``inclusion``) and how
their weights are treated (``weight_treatment``).  The variant grid is a
modelling choice of this package, not a fixed catalogue.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, UnknownIndividual
from .event_store import FightSeries, Roster, participation_counts
from .seeding import rng_for
from .strategy_extraction import DeltaPEdge

INCLUSIONS = ("all", "significant_only", "positive_only", "top_k")
WEIGHT_TREATMENTS = ("measured", "sign_only", "uniform_magnitude")
COMBINES = ("sum", "max_magnitude")


class EmptyFamily(UserWarning):
    """A variant kept no edges."""


@dataclass(frozen=True)
class CircuitVariant:
    inclusion: str = "all"
    weight_treatment: str = "measured"
    alpha: float = 0.05
    k: int = 10
    combine: str = "sum"

    def __post_init__(self):
        if self.inclusion not in INCLUSIONS:
            raise ConfigError(f"inclusion must be one of {INCLUSIONS}")
        if self.weight_treatment not in WEIGHT_TREATMENTS:
            raise ConfigError(f"weight_treatment must be one of {WEIGHT_TREATMENTS}")
        if self.combine not in COMBINES:
            raise ConfigError(f"combine must be one of {COMBINES}")
        if self.inclusion == "top_k" and self.k < 1:
            raise ConfigError("top_k needs k >= 1")

    @property
    def name(self) -> str:
        inc = self.inclusion
        if inc == "significant_only":
            inc = f"significant_only(alpha={self.alpha:g})"
        elif inc == "top_k":
            inc = f"top_k(k={self.k})"
        return f"{inc}/{self.weight_treatment}/{self.combine}"

    def to_dict(self) -> dict:
        return {"inclusion": self.inclusion, "weight_treatment": self.weight_treatment,
                "alpha": self.alpha, "k": self.k, "combine": self.combine}

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitVariant":
        return cls(**{k: d[k] for k in ("inclusion", "weight_treatment", "alpha", "k", "combine") if k in d})


def default_variants() -> list[CircuitVariant]:
    return [
        CircuitVariant("all", "measured"),
        CircuitVariant("significant_only", "measured"),
        CircuitVariant("significant_only", "sign_only"),
        CircuitVariant("positive_only", "measured"),
        CircuitVariant("top_k", "measured", k=10),
        CircuitVariant("top_k", "uniform_magnitude", k=10),
    ]


@dataclass(frozen=True)
class CircuitEdge:
    source: tuple[str, ...]
    target: tuple[str, ...]
    weight: float


@dataclass(frozen=True)
class Circuit:
    roster: Roster
    edges: tuple[CircuitEdge, ...]
    baseline: tuple[float, ...]
    combine: str = "sum"
    variant: CircuitVariant = field(default_factory=CircuitVariant)
    class_label: str = ""
    name: str = ""

    def __post_init__(self):
        if len(self.baseline) != self.roster.size:
            raise ConfigError("baseline must have one entry per roster member")
        if any(not 0.0 <= b <= 1.0 for b in self.baseline):
            raise ConfigError("baseline probabilities must lie in [0, 1]")
        if self.combine not in COMBINES:
            raise ConfigError(f"combine must be one of {COMBINES}")
        seen = set()
        for e in self.edges:
            for x in e.source + e.target:
                if x not in self.roster._position:
                    raise UnknownIndividual(x)
            if not e.source or not e.target:
                raise ConfigError("edge endpoints must be nonempty")
            if not -1.0 <= e.weight <= 1.0:
                raise ConfigError(f"edge weight {e.weight} outside [-1, 1]")
            key = (e.source, e.target)
            if key in seen:
                raise ConfigError(f"duplicate edge {key}")
            seen.add(key)

    @property
    def baseline_map(self) -> dict[str, float]:
        return dict(zip(self.roster.ids, self.baseline))

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=float)

    @property
    def label(self) -> str:
        return self.name or f"{self.class_label} {self.variant.name}".strip()

    def with_weights(self, weights: Sequence[float]) -> "Circuit":
        edges = tuple(replace(e, weight=float(w)) for e, w in zip(self.edges, weights))
        return replace(self, edges=edges)

    def to_json(self) -> dict:
        return {
            "class": self.class_label,
            "name": self.name,
            "combine": self.combine,
            "variant": self.variant.to_dict(),
            "roster": list(self.roster.ids),
            "baseline": self.baseline_map,
            "edges": [{"src": list(e.source), "dst": list(e.target), "w": e.weight} for e in self.edges],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        ids = d.get("roster") or list(d["baseline"])
        roster = Roster.from_ids(ids)
        base = d["baseline"]
        baseline = tuple(float(base.get(x, 0.0)) for x in roster.ids)
        edges = tuple(CircuitEdge(tuple(sorted(e["src"])), tuple(sorted(e["dst"])), float(e["w"])) for e in d["edges"])
        variant = CircuitVariant.from_dict(d.get("variant", {}))
        return cls(roster, edges, baseline, d.get("combine", variant.combine), variant,
                   d.get("class", ""), d.get("name", ""))


def empirical_baseline(series: FightSeries) -> tuple[float, ...]:
    counts = participation_counts(series)
    T = max(series.T, 1)
    return tuple(counts[x] / T for x in series.roster.ids)


def _class_label(edges: Sequence[DeltaPEdge]) -> str:
    sizes = sorted({(len(e.source), len(e.target)) for e in edges})
    if len(sizes) == 1:
        return f"C({sizes[0][0]},{sizes[0][1]})"
    return "mixed"


def _select(edges: list[DeltaPEdge], v: CircuitVariant) -> list[DeltaPEdge]:
    if v.inclusion == "all":
        return list(edges)
    if v.inclusion == "significant_only":
        return [e for e in edges if e.p_value <= v.alpha]
    if v.inclusion == "positive_only":
        return [e for e in edges if e.delta_p > 0]
    return sorted(edges, key=DeltaPEdge.sort_key)[: v.k]


def _weights(chosen: list[DeltaPEdge], treatment: str) -> np.ndarray:
    dp = np.array([e.delta_p for e in chosen], dtype=float)
    if treatment == "measured" or dp.size == 0:
        return dp
    if treatment == "sign_only":
        return np.sign(dp) * np.abs(dp).mean()
    return np.sign(dp) * 0.5 * np.abs(dp).max()


def build_circuit(edges: Sequence[DeltaPEdge], series: FightSeries, variant: CircuitVariant,
                  class_label: str | None = None) -> Circuit:
    chosen = _select(list(edges), variant)
    w = np.clip(_weights(chosen, variant.weight_treatment), -1.0, 1.0)
    cedges = tuple(CircuitEdge(e.source, e.target, float(x)) for e, x in zip(chosen, w))
    label = class_label if class_label is not None else _class_label(edges)
    return Circuit(series.roster, cedges, empirical_baseline(series), variant.combine, variant, label)


def build_family(edges: Sequence[DeltaPEdge], series: FightSeries, variants: Sequence[CircuitVariant],
                 class_label: str | None = None) -> list[Circuit]:
    """One circuit per variant that keeps at least one edge.

    Variants that keep nothing are skipped with an ``EmptyFamily`` warning.
    """
    if not variants:
        raise ConfigError("build_family needs at least one variant")
    family = []
    for v in variants:
        c = build_circuit(edges, series, v, class_label)
        if not c.edges:
            warnings.warn(f"variant {v.name} kept no edges", EmptyFamily, stacklevel=2)
            continue
        family.append(c)
    return family


def null_circuit(series: FightSeries, combine: str = "sum") -> Circuit:
    """Baseline-only circuit with no strategic edges."""
    return Circuit(series.roster, (), empirical_baseline(series), combine,
                   CircuitVariant(combine=combine), "C(0,0)", "baseline-only")


# -- perturbations ---------------------------------------------------------------

_PERTURB = re.compile(r"^\s*(shuffle_weights|rescale|jitter)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


@dataclass(frozen=True)
class Perturbation:
    kind: str
    value: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "Perturbation":
        m = _PERTURB.match(text)
        if not m:
            raise ConfigError(f"cannot parse perturbation {text!r}")
        kind, val = m.group(1), m.group(2)
        if kind == "shuffle_weights":
            return cls(kind)
        if val is None:
            raise ConfigError(f"{kind} needs a value, e.g. {kind}(0.5)")
        return cls(kind, float(val))

    @property
    def label(self) -> str:
        return self.kind if self.kind == "shuffle_weights" else f"{self.kind}({self.value:g})"


def perturb_circuit(circuit: Circuit, mode: Perturbation | str, seed: int) -> Circuit:
    if isinstance(mode, str):
        mode = Perturbation.parse(mode)
    w = circuit.weights
    if mode.kind == "shuffle_weights":
        new = rng_for(seed, "perturb", mode.label).permutation(w)
    elif mode.kind == "rescale":
        new = np.clip(w * mode.value, -1.0, 1.0)
    else:
        if mode.value < 0:
            raise ConfigError("jitter sigma must be >= 0")
        noise = rng_for(seed, "perturb", mode.label).normal(0.0, 1.0, size=w.shape) * mode.value
        new = np.clip(w + noise, -1.0, 1.0)
    return circuit.with_weights(new)
