"""AS2 dataset loading, split statistics and derived QQ/AA pair data."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from qagraph.errors import DatasetError

SPLITS = ("train", "dev", "test")
TSV_COLUMNS = ("question_id", "question", "answer_id", "answer", "label", "split")


def normalize_text(text: str, casefold: bool = False) -> str:
    """Trim and collapse internal whitespace; optionally case-fold."""
    out = " ".join(text.split())
    return out.casefold() if casefold else out


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    split: str


@dataclass(frozen=True)
class AnswerCandidate:
    id: str
    question_id: str
    text: str
    label: int


@dataclass(frozen=True)
class PairExample:
    id_a: str
    id_b: str
    label: int
    kind: str  # "QQ" or "AA"


@dataclass(frozen=True)
class SplitStats:
    n_questions: int
    n_positive: int
    n_negative: int

    def as_dict(self) -> dict:
        return {"#Q": self.n_questions, "#A+": self.n_positive, "#A-": self.n_negative}


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of questions and their answer candidates.

    Ordering is the input order of the source file; every derived view keeps it.
    """

    questions: tuple[Question, ...]
    candidates: tuple[AnswerCandidate, ...]
    name: str = "dataset"
    _q_index: dict = field(init=False, repr=False, compare=False)
    _a_index: dict = field(init=False, repr=False, compare=False)
    _by_question: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        q_index: dict[str, Question] = {}
        for q in self.questions:
            if q.id in q_index:
                raise DatasetError(f"duplicate question id {q.id!r}")
            if q.split not in SPLITS:
                raise DatasetError(f"question {q.id!r}: unknown split {q.split!r}")
            if not q.text.strip():
                raise DatasetError(f"question {q.id!r}: empty text")
            q_index[q.id] = q
        a_index: dict[str, AnswerCandidate] = {}
        by_question: dict[str, list[AnswerCandidate]] = {q.id: [] for q in self.questions}
        for a in self.candidates:
            if a.id in a_index:
                raise DatasetError(f"duplicate answer id {a.id!r}")
            if a.question_id not in q_index:
                raise DatasetError(f"answer {a.id!r} refers to unknown question {a.question_id!r}")
            if a.label not in (0, 1):
                raise DatasetError(f"answer {a.id!r}: label must be 0 or 1")
            a_index[a.id] = a
            by_question[a.question_id].append(a)
        for qid, cands in by_question.items():
            if not cands:
                raise DatasetError(f"question {qid!r} has no answer candidates")
        object.__setattr__(self, "_q_index", q_index)
        object.__setattr__(self, "_a_index", a_index)
        object.__setattr__(
            self, "_by_question", {k: tuple(v) for k, v in by_question.items()}
        )

    def question(self, qid: str) -> Question:
        try:
            return self._q_index[qid]
        except KeyError:
            raise KeyError(f"unknown question id {qid!r}") from None

    def candidate(self, aid: str) -> AnswerCandidate:
        try:
            return self._a_index[aid]
        except KeyError:
            raise KeyError(f"unknown answer id {aid!r}") from None

    def has_question(self, qid: str) -> bool:
        return qid in self._q_index

    def candidates_of(self, qid: str) -> tuple[AnswerCandidate, ...]:
        return self._by_question[qid]

    def questions_in(self, *splits: str) -> list[Question]:
        return [q for q in self.questions if q.split in splits]

    def question_texts(self) -> dict[str, str]:
        return {q.id: q.text for q in self.questions}

    def answer_texts(self) -> dict[str, str]:
        return {a.id: a.text for a in self.candidates}

    def split_of_answer(self, aid: str) -> str:
        return self._q_index[self._a_index[aid].question_id].split


# ---------------------------------------------------------------------------
# loading


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DatasetError(f"{path}:{lineno}: record is not an object")
            yield lineno, rec


def _iter_tsv(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        for lineno, row in enumerate(reader, 1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0] == "question_id":
                continue
            if len(row) != len(TSV_COLUMNS):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(TSV_COLUMNS)} tab-separated fields, got {len(row)}"
                )
            yield lineno, dict(zip(TSV_COLUMNS, row))


def _parse_label(value, where: str) -> int:
    if isinstance(value, bool):
        raise DatasetError(f"{where}: label must be 0 or 1")
    if isinstance(value, int) and value in (0, 1):
        return value
    if isinstance(value, str) and value.strip() in ("0", "1"):
        return int(value.strip())
    raise DatasetError(f"{where}: label must be 0 or 1, got {value!r}")


def records_to_dataset(
    records: Iterable[tuple[int, dict]],
    name: str = "dataset",
    source: str = "<records>",
    filter_answerable: bool = True,
) -> Dataset:
    """Build a Dataset from ``(lineno, record)`` pairs.

    With ``filter_answerable`` train questions need a positive candidate and
    dev/test questions need both a positive and a negative one; others are dropped.
    """
    questions: dict[str, Question] = {}
    cands: list[AnswerCandidate] = []
    seen_answers: set[str] = set()
    for lineno, rec in records:
        where = f"{source}:{lineno}"
        for key in ("question_id", "question", "answer_id", "answer", "label", "split"):
            if key not in rec:
                raise DatasetError(f"{where}: missing field {key!r}")
        qid = str(rec["question_id"])
        split = str(rec["split"]).strip()
        if split not in SPLITS:
            raise DatasetError(f"{where}: unknown split {split!r}")
        qtext = rec["question"]
        if not isinstance(qtext, str) or not qtext.strip():
            raise DatasetError(f"{where}: empty question text")
        prev = questions.get(qid)
        if prev is None:
            questions[qid] = Question(qid, qtext, split)
        elif prev.text != qtext or prev.split != split:
            raise DatasetError(f"{where}: question {qid!r} redefined with different text or split")
        aid = str(rec["answer_id"])
        if aid in seen_answers:
            raise DatasetError(f"{where}: duplicate answer id {aid!r}")
        seen_answers.add(aid)
        atext = rec["answer"]
        if not isinstance(atext, str):
            raise DatasetError(f"{where}: answer text must be a string")
        cands.append(AnswerCandidate(aid, qid, atext, _parse_label(rec["label"], where)))

    if not questions:
        raise DatasetError(f"{source}: no questions")

    if filter_answerable:
        by_q: dict[str, list[int]] = defaultdict(list)
        for a in cands:
            by_q[a.question_id].append(a.label)
        keep = set()
        for qid, q in questions.items():
            labels = by_q[qid]
            if q.split == "train":
                ok = any(labels)
            else:
                ok = any(labels) and not all(labels)
            if ok:
                keep.add(qid)
        questions = {k: v for k, v in questions.items() if k in keep}
        cands = [a for a in cands if a.question_id in keep]
        if not questions:
            raise DatasetError(f"{source}: no questions left after answerability filter")

    return Dataset(tuple(questions.values()), tuple(cands), name=name)


def load_dataset(
    path: str | Path,
    format: str | None = None,
    name: str | None = None,
    filter_answerable: bool = True,
) -> Dataset:
    """Load a JSONL or TSV dataset file; ``format`` defaults from the suffix."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    fmt = format or ("tsv" if path.suffix.lower() in (".tsv", ".txt") else "jsonl")
    if fmt == "jsonl":
        records = _iter_jsonl(path)
    elif fmt == "tsv":
        records = _iter_tsv(path)
    else:
        raise DatasetError(f"unknown dataset format {fmt!r}")
    return records_to_dataset(
        records, name=name or path.stem, source=str(path), filter_answerable=filter_answerable
    )


def write_jsonl(dataset: Dataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for a in dataset.candidates:
            q = dataset.question(a.question_id)
            rec = {
                "question_id": q.id,
                "question": q.text,
                "answer_id": a.id,
                "answer": a.text,
                "label": a.label,
                "split": q.split,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def dataset_stats(dataset: Dataset) -> dict[str, SplitStats]:
    out = {}
    for split in SPLITS:
        qs = dataset.questions_in(split)
        pos = neg = 0
        for q in qs:
            for a in dataset.candidates_of(q.id):
                if a.label:
                    pos += 1
                else:
                    neg += 1
        out[split] = SplitStats(len(qs), pos, neg)
    return out


# ---------------------------------------------------------------------------
# derived QQ / AA pair data


def derive_qq_pairs(
    dataset: Dataset,
    mode: str = "cross",
    casefold: bool = False,
) -> list[PairExample]:
    """Label question pairs by whether they share an answer string.

    ``mode``:
      * ``cross``  -- train x dev pairs
      * ``within`` -- pairs inside train and pairs inside dev
      * ``all``    -- every pair drawn from train + dev
    """
    train = dataset.questions_in("train")
    dev = dataset.questions_in("dev")
    answer_sets = {
        q.id: frozenset(normalize_text(a.text, casefold) for a in dataset.candidates_of(q.id))
        for q in train + dev
    }

    if mode == "cross":
        pairs: Iterable[tuple[Question, Question]] = ((a, b) for a in train for b in dev)
    elif mode == "within":
        pairs = (p for group in (train, dev) for p in combinations(group, 2))
    elif mode == "all":
        pairs = combinations(train + dev, 2)
    else:
        raise ValueError(f"unknown QQ pairing mode {mode!r}")

    out = []
    for qa, qb in pairs:
        label = 1 if answer_sets[qa.id] & answer_sets[qb.id] else 0
        out.append(PairExample(qa.id, qb.id, label, "QQ"))
    return out


def derive_aa_pairs(
    dataset: Dataset,
    splits: Sequence[str] = ("train", "dev"),
    neg_ratio: float = 10.0,
    neg_cap: int | None = None,
    seed: int = 0,
    casefold: bool = False,
) -> list[PairExample]:
    """Label answer pairs via exact-duplicate question groups.

    Positives: answers of different questions sharing the same (normalized)
    text. Negatives: answers of two distinct questions whose texts occur once,
    sub-sampled to ``neg_cap`` (default ``neg_ratio * max(#positives, 1)``).
    """
    qs = dataset.questions_in(*splits)
    groups: dict[str, list[Question]] = defaultdict(list)
    for q in qs:
        groups[normalize_text(q.text, casefold)].append(q)

    positives = []
    for members in groups.values():
        if len(members) < 2:
            continue
        for qa, qb in combinations(members, 2):
            for a in dataset.candidates_of(qa.id):
                for b in dataset.candidates_of(qb.id):
                    positives.append(PairExample(a.id, b.id, 1, "AA"))

    unique_qs = [members[0] for members in groups.values() if len(members) == 1]
    order = {q.id: i for i, q in enumerate(qs)}
    unique_qs.sort(key=lambda q: order[q.id])
    pool = [a for q in unique_qs for a in dataset.candidates_of(q.id)]
    cap = neg_cap if neg_cap is not None else int(math.ceil(neg_ratio * max(len(positives), 1)))

    sizes = [len(dataset.candidates_of(q.id)) for q in unique_qs]
    universe = len(pool) * (len(pool) - 1) // 2 - sum(n * (n - 1) // 2 for n in sizes)
    negatives: list[PairExample] = []
    if cap > 0 and universe > 0:
        if universe <= cap:
            for i, j in combinations(range(len(pool)), 2):
                if pool[i].question_id != pool[j].question_id:
                    negatives.append(PairExample(pool[i].id, pool[j].id, 0, "AA"))
        else:
            rng = np.random.default_rng(seed)
            chosen: set[tuple[int, int]] = set()
            n = len(pool)
            while len(chosen) < cap:
                draws = rng.integers(0, n, size=(2 * (cap - len(chosen)) + 16, 2))
                for i, j in draws:
                    i, j = (int(i), int(j)) if i < j else (int(j), int(i))
                    if i == j or pool[i].question_id == pool[j].question_id:
                        continue
                    chosen.add((i, j))
                    if len(chosen) == cap:
                        break
            for i, j in sorted(chosen):
                negatives.append(PairExample(pool[i].id, pool[j].id, 0, "AA"))
    return positives + negatives


def pair_label_map(pairs: Iterable[PairExample]) -> dict[tuple[str, str], int]:
    """Index pair labels by the sorted id pair."""
    out: dict[tuple[str, str], int] = {}
    for p in pairs:
        key = (p.id_a, p.id_b) if p.id_a <= p.id_b else (p.id_b, p.id_a)
        out[key] = p.label
    return out


def write_pairs_tsv(pairs: Iterable[PairExample], path: str | Path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for p in pairs:
            fh.write(f"{p.id_a}\t{p.id_b}\t{p.label}\n")
            n += 1
    return n


def stats_table(stats: Mapping[str, SplitStats]) -> str:
    lines = [f"{'':6s}" + "".join(f"{s:>10s}" for s in SPLITS)]
    for label, attr in (("#Q", "n_questions"), ("#A+", "n_positive"), ("#A-", "n_negative")):
        lines.append(f"{label:6s}" + "".join(f"{getattr(stats[s], attr):>10d}" for s in SPLITS))
    return "\n".join(lines)
