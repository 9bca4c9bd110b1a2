"""Pairwise relevance scores from precomputed tables or a lexical fallback."""

from __future__ import annotations

import logging
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from qagraph.errors import ConfigError, MissingScoreError, ScoreTableError

log = logging.getLogger(__name__)

KINDS = ("QQ", "QA", "AA")
SYMMETRIC_KINDS = ("QQ", "AA")
MISSING_POLICIES = ("error", "zero")


def check_threshold(name: str, value: float) -> float:
    """Reject thresholds outside [0, 1]; log a warning outside [0.7, 1.0]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    if value < 0.7:
        log.warning("%s=%.3f is below the usual tuning range [0.7, 1.0]", name, value)
    return value


@dataclass
class ScoreTable:
    kind: str
    entries: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ScoreTableError(f"unknown score kind {self.kind!r}")

    @property
    def symmetric(self) -> bool:
        return self.kind in SYMMETRIC_KINDS

    def _key(self, a: str, b: str) -> tuple[str, str]:
        if self.symmetric and b < a:
            return (b, a)
        return (a, b)

    def add(self, a: str, b: str, score: float) -> None:
        if not 0.0 <= score <= 1.0:
            raise ScoreTableError(f"score for ({a}, {b}) outside [0, 1]: {score}")
        key = self._key(a, b)
        prev = self.entries.get(key)
        if prev is not None and prev != score:
            raise ScoreTableError(f"conflicting scores for ({a}, {b}): {prev} vs {score}")
        self.entries[key] = score

    def lookup(self, a: str, b: str) -> float | None:
        """Stored score, or ``None`` when the pair is absent."""
        return self.entries.get(self._key(a, b))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return self._key(*pair) in self.entries


def load_score_table(path: str | Path, kind: str) -> ScoreTable:
    """Read ``id_a<TAB>id_b<TAB>score`` rows. Blank lines and ``#`` comments are skipped."""
    path = Path(path)
    if not path.is_file():
        raise ScoreTableError(f"score file not found: {path}")
    table = ScoreTable(kind)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ScoreTableError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                score = float(parts[2])
            except ValueError:
                raise ScoreTableError(f"{path}:{lineno}: unparseable score {parts[2]!r}") from None
            try:
                table.add(parts[0], parts[1], score)
            except ScoreTableError as exc:
                raise ScoreTableError(f"{path}:{lineno}: {exc}") from None
    return table


def _tokens(text: str) -> frozenset[str]:
    return frozenset(text.lower().split())


def lexical_score(text_a: str, text_b: str) -> float:
    """Jaccard overlap of lowercased whitespace tokens (1.0 when both are empty)."""
    ta, tb = _tokens(text_a), _tokens(text_b)
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


class Scorer:
    """Deterministic pairwise scorer backed by a table or by lexical overlap.

    For the lexical source, ``texts_a``/``texts_b`` map ids of the first and
    second argument to their sentences; arguments not found there are taken as
    raw text. Identical ids score 1.0 (identity similarity) for symmetric kinds.
    """

    def __init__(
        self,
        kind: str,
        table: ScoreTable | None = None,
        texts_a: Mapping[str, str] | None = None,
        texts_b: Mapping[str, str] | None = None,
        missing: str = "error",
    ):
        if kind not in KINDS:
            raise ConfigError(f"unknown score kind {kind!r}")
        if missing not in MISSING_POLICIES:
            raise ConfigError(f"missing-pair policy must be one of {MISSING_POLICIES}")
        if table is not None and table.kind != kind:
            raise ConfigError(f"table of kind {table.kind} used for a {kind} scorer")
        self.kind = kind
        self.table = table
        self.texts_a = texts_a or {}
        self.texts_b = texts_b if texts_b is not None else self.texts_a
        self.missing = missing
        self._misses = 0
        self._lock = threading.Lock()
        self._token_cache: dict[tuple[int, str], frozenset[str]] = {}

    def __getstate__(self) -> dict:
        state = self.__dict__.copy()
        del state["_lock"]
        state["_token_cache"] = {}
        return state

    def __setstate__(self, state: dict) -> None:
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @classmethod
    def lexical(cls, kind: str, dataset=None, missing: str = "error") -> "Scorer":
        texts_a = texts_b = None
        if dataset is not None:
            qt, at = dataset.question_texts(), dataset.answer_texts()
            texts_a = {"QQ": qt, "QA": qt, "AA": at}[kind]
            texts_b = {"QQ": qt, "QA": at, "AA": at}[kind]
        return cls(kind, texts_a=texts_a, texts_b=texts_b, missing=missing)

    @property
    def source(self) -> str:
        return "table" if self.table is not None else "lexical"

    @property
    def symmetric(self) -> bool:
        return self.kind in SYMMETRIC_KINDS

    @property
    def misses(self) -> int:
        return self._misses

    def _toks(self, side: int, key: str) -> frozenset[str]:
        cached = self._token_cache.get((side, key))
        if cached is None:
            texts = self.texts_a if side == 0 else self.texts_b
            cached = _tokens(texts.get(key, key))
            self._token_cache[(side, key)] = cached
        return cached

    def __call__(self, a: str, b: str) -> float:
        if a == b and self.symmetric:
            return 1.0
        if self.table is not None:
            value = self.table.lookup(a, b)
            if value is None:
                if self.missing == "error":
                    raise MissingScoreError(f"no {self.kind} score for pair ({a}, {b})")
                with self._lock:
                    self._misses += 1
                return 0.0
            return value
        ta, tb = self._toks(0, a), self._toks(1, b)
        if not ta and not tb:
            return 1.0
        return len(ta & tb) / len(ta | tb)

    score = __call__

    def pairs_at_least(self, items: Sequence[str], th: float) -> list[tuple[int, int, float]]:
        """All index pairs ``i < j`` of ``items`` scoring at least ``th``.

        Only valid for symmetric kinds. The lexical source skips token-disjoint
        pairs when ``th > 0`` since their score is 0.
        """
        if not self.symmetric:
            raise ConfigError("pairs_at_least needs a symmetric scorer")
        out = []
        if self.table is None and th > 0.0:
            postings: dict[str, list[int]] = defaultdict(list)
            for i, item in enumerate(items):
                for tok in self._toks(0, item):
                    postings[tok].append(i)
            candidates: set[tuple[int, int]] = set()
            for idx in postings.values():
                candidates.update(combinations(idx, 2))
            # identical ids and empty-vs-empty texts score 1 without sharing tokens
            by_id: dict[str, list[int]] = defaultdict(list)
            empties = []
            for i, item in enumerate(items):
                by_id[item].append(i)
                if not self._toks(0, item):
                    empties.append(i)
            for idx in by_id.values():
                candidates.update(combinations(idx, 2))
            candidates.update(combinations(empties, 2))
            for i, j in sorted(candidates):
                s = self(items[i], items[j])
                if s >= th:
                    out.append((i, j, s))
            return out
        for i, j in combinations(range(len(items)), 2):
            s = self(items[i], items[j])
            if s >= th:
                out.append((i, j, s))
        return out


def get_score(scorer: Scorer, a: str, b: str) -> float:
    return scorer(a, b)


def top_k(scored: Sequence[tuple[Hashable, float]], k: int, threshold: float) -> list[tuple[Hashable, float]]:
    """Stable sort by score descending, cut to ``k``, then drop scores below ``threshold``."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    ranked = sorted(scored, key=lambda item: -item[1])
    return [item for item in ranked[:k] if item[1] >= threshold]


def rank_top_k(
    scorer: Scorer,
    anchor: str,
    candidates: Iterable[str],
    k: int,
    threshold: float,
) -> list[tuple[str, float]]:
    return top_k([(c, scorer(anchor, c)) for c in candidates], k, threshold)


@dataclass
class Scorers:
    """The three relation scorers a graph builder needs."""

    qq: Scorer
    qa: Scorer
    aa: Scorer | None = None

    @classmethod
    def lexical(cls, dataset, missing: str = "error") -> "Scorers":
        return cls(
            qq=Scorer.lexical("QQ", dataset, missing),
            qa=Scorer.lexical("QA", dataset, missing),
            aa=Scorer.lexical("AA", dataset, missing),
        )
