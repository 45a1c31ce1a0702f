"""Fight-participation time series: data model, ingestion and serialization.

Each fight is stored as a fixed-width bitset over a sorted roster (bit ``k``
is roster member ``k``).  Bulk kernels work on a ``(T, W)`` array of uint64
words so tuple-membership tests are a mask-and-compare.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateId, EmptyEvent, ParseError, UnknownIndividual

WORD_BITS = 64

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class Roster:
    ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.ids) < 1:
            raise ParseError("roster must contain at least one individual")
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateId("roster ids must be unique")
        if list(self.ids) != sorted(self.ids):
            raise ValueError("roster ids must be sorted; use Roster.from_ids")

    @classmethod
    def from_ids(cls, ids: Iterable[str]) -> "Roster":
        return cls(tuple(sorted(set(ids))))

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def n_words(self) -> int:
        return (self.size + WORD_BITS - 1) // WORD_BITS

    @cached_property
    def _position(self) -> dict[str, int]:
        return {x: k for k, x in enumerate(self.ids)}

    def index(self, ident: str) -> int:
        try:
            return self._position[ident]
        except KeyError:
            raise UnknownIndividual(ident) from None

    def mask(self, members: Iterable[str]) -> int:
        m = 0
        for x in members:
            m |= 1 << self.index(x)
        return m

    def members(self, mask: int) -> tuple[str, ...]:
        return tuple(self.ids[k] for k in range(self.size) if mask >> k & 1)

    def mask_words(self, mask: int) -> np.ndarray:
        return _int_to_words(mask, self.n_words)


@dataclass(frozen=True)
class FightEvent:
    index: int
    participants: int

    @property
    def size(self) -> int:
        return self.participants.bit_count()

    def contains(self, mask: int) -> bool:
        return self.participants & mask == mask


@dataclass(frozen=True)
class FightSeries:
    roster: Roster
    events: tuple[FightEvent, ...]

    def __post_init__(self):
        limit = 1 << self.roster.size
        for pos, ev in enumerate(self.events):
            if ev.index != pos:
                raise ValueError(f"event index {ev.index} at position {pos}")
            if ev.participants <= 0 or ev.participants >= limit:
                raise EmptyEvent(f"event {pos} is empty or outside the roster")

    @classmethod
    def from_sets(cls, fights: Sequence[Iterable[str]], roster: Roster | None = None) -> "FightSeries":
        fights = [list(f) for f in fights]
        if roster is None:
            roster = Roster.from_ids(x for f in fights for x in f)
        events = []
        for t, f in enumerate(fights):
            if not f:
                raise EmptyEvent(f"fight {t} has no participants")
            events.append(FightEvent(t, roster.mask(f)))
        return cls(roster, tuple(events))

    @classmethod
    def from_masks(cls, roster: Roster, masks: Iterable[int]) -> "FightSeries":
        return cls(roster, tuple(FightEvent(t, int(m)) for t, m in enumerate(masks)))

    @classmethod
    def from_matrix(cls, roster: Roster, matrix: np.ndarray) -> "FightSeries":
        matrix = np.asarray(matrix, dtype=bool)
        weights = [1 << k for k in range(roster.size)]
        masks = [sum(w for w, b in zip(weights, row) if b) for row in matrix.tolist()]
        return cls.from_masks(roster, masks)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def T(self) -> int:
        return len(self.events)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(ev.participants for ev in self.events)

    @cached_property
    def words(self) -> np.ndarray:
        """Participation bitsets as a read-only ``(T, W)`` uint64 array."""
        out = np.zeros((self.T, self.roster.n_words), dtype=np.uint64)
        for t, m in enumerate(self.masks):
            out[t] = _int_to_words(m, self.roster.n_words)
        out.setflags(write=False)
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``(T, N)`` boolean participation matrix (read-only)."""
        w = self.words
        bits = np.arange(WORD_BITS, dtype=np.uint64)
        out = ((w[:, :, None] >> bits) & np.uint64(1)).astype(bool)
        out = out.reshape(self.T, self.roster.n_words * WORD_BITS)[:, : self.roster.size]
        out.setflags(write=False)
        return out

    def sizes(self) -> np.ndarray:
        return np.fromiter((m.bit_count() for m in self.masks), dtype=np.int64, count=self.T)

    def event_members(self, t: int) -> tuple[str, ...]:
        return self.roster.members(self.events[t].participants)

    def with_masks(self, masks: Iterable[int]) -> "FightSeries":
        return FightSeries.from_masks(self.roster, masks)


def _int_to_words(mask: int, n_words: int) -> np.ndarray:
    lo = (1 << WORD_BITS) - 1
    return np.array([(mask >> (WORD_BITS * w)) & lo for w in range(n_words)], dtype=np.uint64)


def tuple_indicator(words: np.ndarray, tuple_words: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """``out[t, k]`` is True iff event ``t`` contains every member of tuple ``k``.

    ``words`` is ``(T, W)``, ``tuple_words`` is ``(K, W)``.
    """
    T, K = words.shape[0], tuple_words.shape[0]
    out = np.empty((T, K), dtype=bool)
    for lo in range(0, K, chunk):
        tw = tuple_words[lo : lo + chunk]
        hit = (words[:, None, :] & tw[None, :, :]) == tw[None, :, :]
        out[:, lo : lo + chunk] = hit.all(axis=2)
    return out


def participation_counts(series: FightSeries) -> dict[str, int]:
    if series.T == 0:
        return {x: 0 for x in series.roster.ids}
    col = series.matrix.sum(axis=0)
    return {x: int(c) for x, c in zip(series.roster.ids, col)}


def filter_min_size(series: FightSeries, min_size: int) -> FightSeries:
    return series.with_masks(m for m in series.masks if m.bit_count() >= min_size)


# -- ingestion ---------------------------------------------------------------


def _tokens(line: str, lineno: int) -> list[str]:
    out = []
    for piece in line.split(","):
        parts = [p for p in _WS.split(piece.strip()) if p]
        if not parts:
            raise ParseError(f"line {lineno}: empty field in {line!r}")
        out.extend(parts)
    return out


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("#"):
            continue
        yield lineno, raw


def parse_lines(text: str) -> FightSeries:
    fights = []
    for lineno, raw in _content_lines(text):
        if not raw.strip():
            raise EmptyEvent(f"line {lineno}: fight with zero participants")
        ids = _tokens(raw, lineno)
        if len(set(ids)) != len(ids):
            raise DuplicateId(f"line {lineno}: repeated id in {raw!r}")
        fights.append(ids)
    if not fights:
        raise ParseError("no fights found")
    return FightSeries.from_sets(fights)


def parse_matrix(text: str) -> FightSeries:
    rows = [(n, r) for n, r in _content_lines(text) if r.strip()]
    if not rows:
        raise ParseError("missing header row")
    header_no, header = rows[0]
    ids = _tokens(header, header_no)
    if len(set(ids)) != len(ids):
        raise DuplicateId(f"line {header_no}: repeated id in header")
    roster = Roster.from_ids(ids)
    order = [roster.index(x) for x in ids]
    masks = []
    for lineno, raw in rows[1:]:
        cells = _tokens(raw, lineno)
        if len(cells) != len(ids):
            raise ParseError(f"line {lineno}: expected {len(ids)} cells, got {len(cells)}")
        mask = 0
        for pos, cell in zip(order, cells):
            if cell == "1":
                mask |= 1 << pos
            elif cell != "0":
                raise ParseError(f"line {lineno}: cell {cell!r} is not 0/1")
        if not mask:
            raise EmptyEvent(f"line {lineno}: fight with zero participants")
        masks.append(mask)
    if not masks:
        raise ParseError("no fights found")
    return FightSeries.from_masks(roster, masks)


def load_series(path: str | Path, format: str = "lines") -> FightSeries:
    text = Path(path).read_text(encoding="utf-8")
    if format == "lines":
        return parse_lines(text)
    if format == "matrix":
        return parse_matrix(text)
    raise ValueError(f"unknown format {format!r}")


def to_lines(series: FightSeries) -> str:
    return "".join(",".join(series.event_members(t)) + "\n" for t in range(series.T))


def to_matrix(series: FightSeries) -> str:
    lines = [" ".join(series.roster.ids)]
    for row in series.matrix:
        lines.append(" ".join("1" if b else "0" for b in row))
    return "\n".join(lines) + "\n"


def save_series(series: FightSeries, path: str | Path, format: str = "lines") -> None:
    text = to_lines(series) if format == "lines" else to_matrix(series)
    Path(path).write_text(text, encoding="utf-8")
