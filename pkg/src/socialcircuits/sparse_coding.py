"""Non-negative sparse coding of the participation matrix and sparse-group strategies.

Minimizes ``||X - D A||_F^2 + lam * sum(A)`` with ``X`` the roster x events
binary matrix, ``D >= 0`` with unit-norm columns and ``A >= 0``.  Both block
updates are exact coordinate minimizers, so the objective never increases:

* activations: one HALS sweep over rows of ``A`` with soft-threshold ``lam/2``;
* dictionary: per column, ``d_k = [v]_+ / ||[v]_+||`` where ``v`` is the
  residual correlation with ``a_k``.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .event_store import FightSeries
from .null_model import NullConfig
from .seeding import derive_seed, rng_for
from .strategy_extraction import DeltaPEdge, _source_counts, edges_from_grid

log = logging.getLogger(__name__)

REL_EPS = 1e-12


@dataclass
class SparseBasis:
    dictionary: np.ndarray  # (N, K)
    activations: np.ndarray  # (K, T)
    lam: float
    reconstruction_error: float
    roster: tuple[str, ...] = ()
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0

    @property
    def K(self) -> int:
        return self.dictionary.shape[1]

    @property
    def objective(self) -> float:
        return self.reconstruction_error + self.lam * float(self.activations.sum())

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.activations))

    def to_json(self) -> dict:
        return {
            "roster": list(self.roster),
            "K": self.K,
            "lambda": self.lam,
            "reconstruction_error": self.reconstruction_error,
            "objective": self.objective,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "dictionary": [[float(x) for x in self.dictionary[:, k]] for k in range(self.K)],
            "activations": [[float(x) for x in row] for row in self.activations],
            "objective_trace": [float(x) for x in self.objective_trace],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SparseBasis":
        D = np.array(d["dictionary"], dtype=float).T
        A = np.array(d["activations"], dtype=float).reshape(D.shape[1], -1)
        return cls(D, A, float(d["lambda"]), float(d["reconstruction_error"]), tuple(d.get("roster", ())),
                   list(d.get("objective_trace", [])), bool(d.get("converged", False)), int(d.get("n_iter", 0)))


@dataclass(frozen=True)
class SparseGroup:
    members: tuple[str, ...]
    component_index: int
    threshold_used: float

    def to_json(self) -> dict:
        return {"idx": self.component_index, "members": list(self.members), "threshold": self.threshold_used}

    @classmethod
    def from_json(cls, d: dict) -> "SparseGroup":
        return cls(tuple(sorted(d["members"])), int(d["idx"]), float(d["threshold"]))


def participation_matrix(series: FightSeries) -> np.ndarray:
    return series.matrix.T.astype(float)


def _objective(X, D, A, lam):
    R = X - D @ A
    err = float(np.sum(R * R))
    return err, err + lam * float(A.sum())


def _init_dictionary(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style pick of K distinct observed events as unit columns.

    When there are fewer distinct events than K the rest are filled with the
    unit vectors of the most active individuals not yet covered.
    """
    N, T = X.shape
    cols = np.unique(X.T, axis=0)
    cols = cols[cols.sum(axis=1) > 0]
    unit = cols / np.linalg.norm(cols, axis=1, keepdims=True)
    chosen: list[int] = []
    if len(unit):
        chosen.append(int(rng.integers(len(unit))))
        d2 = np.sum((unit - unit[chosen[0]]) ** 2, axis=1)
        while len(chosen) < min(K, len(unit)):
            total = d2.sum()
            if total <= 0:
                break
            nxt = int(rng.choice(len(unit), p=d2 / total))
            chosen.append(nxt)
            d2 = np.minimum(d2, np.sum((unit - unit[nxt]) ** 2, axis=1))
    D = np.zeros((N, K))
    for k, idx in enumerate(chosen):
        D[:, k] = unit[idx]
    activity = X.sum(axis=1)
    order = np.lexsort((np.arange(N), -activity))
    k = len(chosen)
    for i in order:
        if k >= K:
            break
        e = np.zeros(N)
        e[i] = 1.0
        if not any(np.allclose(D[:, j], e) for j in range(k)):
            D[:, k] = e
            k += 1
    return D


def _update_activations(X, D, A, lam):
    G = D.T @ D
    DX = D.T @ X
    for k in range(D.shape[1]):
        g = G[k, k]
        if g <= 0:
            A[k] = 0.0
            continue
        num = DX[k] - G[k] @ A + g * A[k] - 0.5 * lam
        A[k] = np.maximum(num, 0.0) / g


def _update_dictionary(X, D, A):
    XA = X @ A.T
    AA = A @ A.T
    for k in range(D.shape[1]):
        if AA[k, k] <= 0:
            continue
        v = XA[:, k] - D @ AA[:, k] + D[:, k] * AA[k, k]
        vp = np.maximum(v, 0.0)
        norm = np.linalg.norm(vp)
        if norm > 0:
            D[:, k] = vp / norm
        else:
            d = np.zeros_like(v)
            d[int(np.argmax(v))] = 1.0
            D[:, k] = d


def fit_matrix(X: np.ndarray, K: int, lam: float, max_iters: int = 500, tol: float = 1e-7,
               seed: int = 0) -> SparseBasis:
    if K < 1:
        raise ConfigError("K must be >= 1")
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    rng = rng_for(seed, "sparse_coding", "init")
    D = _init_dictionary(X, K, rng)
    A = np.zeros((K, X.shape[1]))
    _, obj = _objective(X, D, A, lam)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        _update_activations(X, D, A, lam)
        _update_dictionary(X, D, A)
        _, new = _objective(X, D, A, lam)
        trace.append(new)
        if obj - new <= tol * max(abs(obj), 1e-300):
            converged = True
            break
        obj = new
    err, _ = _objective(X, D, A, lam)
    return SparseBasis(D, A, float(lam), err, (), trace, converged, it)


def fit_sparse_code(series: FightSeries, K: int = 12, lam: float | None = None, max_iters: int = 500,
                    tol: float = 1e-7, seed: int = 0) -> SparseBasis:
    """Fit a non-negative sparse code; ``lam=None`` picks it with :func:`select_lambda`."""
    X = participation_matrix(series)
    if lam is None:
        basis, _ = select_lambda(series, K, max_iters=max_iters, tol=tol, seed=seed)
        return basis
    basis = fit_matrix(X, K, lam, max_iters, tol, seed)
    basis.roster = series.roster.ids
    return basis


def lambda_grid(X: np.ndarray, n: int = 5) -> np.ndarray:
    # above 2*max column norm every activation is shrunk to zero
    top = 2.0 * float(np.sqrt(X.sum(axis=0).max())) if X.size else 1.0
    return top * np.logspace(-2, -0.5, n)


def bic_score(basis: SparseBasis, n_cells: int) -> float:
    rss = max(basis.reconstruction_error, 1e-12)
    return n_cells * math.log(rss / n_cells) + basis.nnz * math.log(n_cells)


def select_lambda(series: FightSeries, K: int, grid: Sequence[float] | None = None, max_iters: int = 500,
                  tol: float = 1e-7, seed: int = 0, workers: int = 1) -> tuple[SparseBasis, list[dict]]:
    """Fit every grid value and keep the lowest BIC-like score."""
    X = participation_matrix(series)
    grid = list(lambda_grid(X) if grid is None else grid)

    def fit(lam):
        return fit_matrix(X, K, float(lam), max_iters, tol, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(fit, grid))
    else:
        fits = [fit(g) for g in grid]
    scores = [bic_score(b, X.size) for b in fits]
    best = int(np.argmin(scores))
    table = [{"lambda": float(g), "score": s, "reconstruction_error": b.reconstruction_error, "nnz": b.nnz}
             for g, s, b in zip(grid, scores, fits)]
    basis = fits[best]
    basis.roster = series.roster.ids
    return basis, table


def sweep_K(series: FightSeries, Ks: Sequence[int], lam: float | None = None, max_iters: int = 500,
            tol: float = 1e-7, seed: int = 0) -> list[dict]:
    rows = []
    for K in Ks:
        b = fit_sparse_code(series, K, lam, max_iters, tol, derive_seed(seed, "sweep", K))
        rows.append({"K": K, "lambda": b.lam, "reconstruction_error": b.reconstruction_error,
                     "sparsity": b.nnz / b.activations.size if b.activations.size else 0.0,
                     "converged": b.converged})
    return rows


# -- groups ----------------------------------------------------------------------


def otsu_threshold(values: np.ndarray) -> float:
    """Split point maximizing between-class variance; returns the lowest upper-class value."""
    v = np.sort(values)
    uniq = np.unique(v)
    if len(uniq) == 1:
        return float(uniq[0])
    best, best_t = -1.0, float(uniq[-1])
    n = len(v)
    for t in uniq[1:]:
        lo, hi = v[v < t], v[v >= t]
        w0, w1 = len(lo) / n, len(hi) / n
        between = w0 * w1 * (lo.mean() - hi.mean()) ** 2
        if between > best:
            best, best_t = between, float(t)
    return best_t


def extract_groups(basis: SparseBasis, threshold: float | str = 0.5,
                   roster: Sequence[str] | None = None) -> list[SparseGroup]:
    ids = tuple(roster) if roster is not None else basis.roster
    if len(ids) != basis.dictionary.shape[0]:
        raise ConfigError("roster length does not match dictionary rows")
    groups, seen = [], set()
    for k in range(basis.K):
        col = basis.dictionary[:, k]
        top = col.max()
        if top <= 0:
            continue
        rel = col / top
        thr = otsu_threshold(rel) if threshold == "otsu" else float(threshold)
        # slack so an entry sitting on the threshold does not flip under rescaling
        members = tuple(sorted(ids[i] for i in np.flatnonzero(rel >= thr - REL_EPS)))
        if not members or members in seen:
            continue
        seen.add(members)
        groups.append(SparseGroup(members, k, thr))
    return groups


def groups_to_jsonl(groups: Sequence[SparseGroup]) -> str:
    return "".join(json.dumps(g.to_json()) + "\n" for g in groups)


def groups_from_jsonl(text: str) -> list[SparseGroup]:
    return [SparseGroup.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


# -- sparse strategy space -------------------------------------------------------


def sparse_candidate_count(n_groups: int, roster_size: int) -> int:
    """Group-to-group plus group-to-individual pairs before any filtering."""
    return n_groups * n_groups + n_groups * roster_size


def sparse_extract_all(series: FightSeries, groups: Sequence[SparseGroup], null_config: NullConfig,
                       max_tuple: int = 5, min_source_count: int = 5, individual_targets: bool = True,
                       disjoint: bool = False) -> list[DeltaPEdge]:
    """ΔP edges between sparse groups (C(s_i, s_j)) and from groups to individuals (C(s_i, 1)).

    A group participates in an event when all its members are present.  Tuples
    that coincide (a singleton group and the matching individual) are merged.
    """
    if not groups:
        raise ConfigError("sparse_extract_all needs at least one group")
    roster = series.roster
    kept = [g for g in groups if len(g.members) <= max_tuple]
    dropped = len(groups) - len(kept)
    if dropped:
        warnings.warn(f"{dropped} groups larger than {max_tuple} excluded", stacklevel=2)
    group_masks = sorted({roster.mask(g.members) for g in kept}, key=roster.members)
    if not group_masks:
        return []
    counts = _source_counts(series, group_masks) if series.T > 1 else np.zeros(len(group_masks), dtype=int)
    sources = [m for m, c in zip(group_masks, counts) if c >= min_source_count]
    targets = set(group_masks)
    if individual_targets:
        targets |= {1 << k for k in range(roster.size)}
    targets = sorted(targets, key=roster.members)
    return edges_from_grid(series, sources, targets, null_config, disjoint=disjoint)
