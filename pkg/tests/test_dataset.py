import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_dataset
from oracles import aa_pairs, qq_pairs
from qagraph.dataset import (
    Dataset,
    Question,
    dataset_stats,
    derive_aa_pairs,
    derive_qq_pairs,
    load_dataset,
    normalize_text,
    pair_label_map,
    records_to_dataset,
    write_jsonl,
    write_pairs_tsv,
)
from qagraph.errors import DatasetError


def _rec(qid, q, aid, a, label, split):
    return {"question_id": qid, "question": q, "answer_id": aid, "answer": a,
            "label": label, "split": split}


def _write_jsonl(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs), encoding="utf-8")


# --- loading -----------------------------------------------------------------


def test_single_question_loads(tmp_path):
    p = tmp_path / "one.jsonl"
    _write_jsonl(p, [_rec("q1", "who?", "a1", "me", 1, "test"), _rec("q1", "who?", "a2", "you", 0, "test")])
    ds = load_dataset(p)
    st_ = dataset_stats(ds)["test"]
    assert (st_.n_questions, st_.n_positive, st_.n_negative) == (1, 1, 1)


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    with pytest.raises(DatasetError, match="no questions"):
        load_dataset(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    good = json.dumps(_rec("q1", "x", "a1", "y", 1, "train"))
    p.write_text(good + "\n" + good.replace("a1", "a2") + "\n{not json\n")
    with pytest.raises(DatasetError, match=r":3"):
        load_dataset(p)


def test_missing_field_reports_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    rec = _rec("q1", "x", "a1", "y", 1, "train")
    del rec["label"]
    _write_jsonl(p, [rec])
    with pytest.raises(DatasetError, match=r":1.*label"):
        load_dataset(p)


def test_unknown_split_rejected(tmp_path):
    p = tmp_path / "s.jsonl"
    _write_jsonl(p, [_rec("q1", "x", "a1", "y", 1, "holdout")])
    with pytest.raises(DatasetError, match="unknown split"):
        load_dataset(p)


@pytest.mark.parametrize("label", [2, "yes", -1, True])
def test_bad_label_rejected(tmp_path, label):
    p = tmp_path / "l.jsonl"
    _write_jsonl(p, [_rec("q1", "x", "a1", "y", label, "train")])
    with pytest.raises(DatasetError, match="label"):
        load_dataset(p)


def test_question_without_candidates_rejected():
    with pytest.raises(DatasetError, match="no answer candidates"):
        Dataset((Question("q1", "x", "test"),), ())


def test_answerability_filter():
    recs = [
        _rec("t1", "a", "t1a", "x", 1, "train"),
        _rec("t2", "b", "t2a", "x", 0, "train"),  # no positive: dropped
        _rec("d1", "c", "d1a", "x", 1, "dev"),  # no negative: dropped
        _rec("s1", "d", "s1a", "x", 1, "test"),
        _rec("s1", "d", "s1b", "y", 0, "test"),
        _rec("s2", "e", "s2a", "y", 0, "test"),  # no positive: dropped
    ]
    ds = records_to_dataset(enumerate(recs, 1))
    assert [q.id for q in ds.questions] == ["t1", "s1"]
    kept = records_to_dataset(enumerate(recs, 1), filter_answerable=False)
    assert len(kept.questions) == 5


def test_tsv_with_header(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text(
        "question_id\tquestion\tanswer_id\tanswer\tlabel\tsplit\n"
        "q1\twho is\ta1\tthat one\t1\ttest\n"
        "q1\twho is\ta2\tnot it\t0\ttest\n"
    )
    ds = load_dataset(p)
    assert [a.id for a in ds.candidates] == ["a1", "a2"]
    assert ds.question("q1").text == "who is"


def test_tsv_short_row_reports_line(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("q1\twho\ta1\tx\t1\ttest\nq1\twho\ta2\n")
    with pytest.raises(DatasetError, match=r":2"):
        load_dataset(p)


def test_normalize_text():
    assert normalize_text("  Paris.\t ") == "Paris."
    assert normalize_text("a   b\nc") == "a b c"
    assert normalize_text("Paris") != normalize_text("paris")
    assert normalize_text("Paris", casefold=True) == normalize_text("paris", casefold=True)


# --- round trip ----------------------------------------------------------------

words = st.sampled_from(["paris", "rome", "lyon", "the", "city", "is", "capital", "of"])
texts = st.lists(words, min_size=1, max_size=5).map(" ".join)


@st.composite
def datasets(draw, max_questions=12, splits=("train", "dev", "test")):
    n = draw(st.integers(1, max_questions))
    layout = []
    for i in range(n):
        split = draw(st.sampled_from(splits))
        qtext = draw(texts)
        k = draw(st.integers(1, 4))
        answers = [(f"q{i}a{j}", draw(texts), draw(st.integers(0, 1))) for j in range(k)]
        layout.append((f"q{i}", qtext, split, answers))
    return make_dataset(layout)


@settings(max_examples=50, deadline=None)
@given(datasets())
def test_write_then_load_round_trip(tmp_path_factory, ds):
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    write_jsonl(ds, path)
    back = load_dataset(path, filter_answerable=False, name=ds.name)
    assert back.questions == ds.questions
    assert back.candidates == ds.candidates
    assert dataset_stats(back) == dataset_stats(ds)
    write_jsonl(back, path.with_suffix(".2"))
    assert path.read_bytes() == path.with_suffix(".2").read_bytes()


@settings(max_examples=50, deadline=None)
@given(datasets())
def test_stats_match_enumeration(ds):
    got = dataset_stats(ds)
    for split in ("train", "dev", "test"):
        qids = {q.id for q in ds.questions if q.split == split}
        labels = [a.label for a in ds.candidates if a.question_id in qids]
        assert got[split].n_questions == len(qids)
        assert got[split].n_positive == labels.count(1)
        assert got[split].n_negative == labels.count(0)


# --- QQ pairs ------------------------------------------------------------------


def _paris_fixture():
    return make_dataset([
        ("q1", "capital of france", "train", [("a1", "Paris.", 1)]),
        ("q2", "city on seine", "train", [("a2", "Paris. ", 1), ("a3", "Lyon.", 0)]),
        ("q3", "capital of italy", "train", [("a4", "Rome.", 1)]),
    ])


def test_qq_shared_and_disjoint():
    labels = pair_label_map(derive_qq_pairs(_paris_fixture(), mode="all"))
    assert labels[("q1", "q2")] == 1
    assert labels[("q1", "q3")] == 0
    assert labels[("q2", "q3")] == 0


def test_qq_planted_shared_answers_count():
    layout = [(f"q{i}", f"question {i}", "train", [(f"a{i}", f"unique answer {i}", 1)]) for i in range(10)]
    for a, b in [(0, 1), (2, 3), (4, 5)]:
        layout[b][3].append((f"shared{a}", f"unique answer {a}", 0))
    ds = make_dataset(layout)
    pairs = derive_qq_pairs(ds, mode="all")
    assert sum(p.label for p in pairs) == 3
    assert len(pairs) == math.comb(10, 2)


@settings(max_examples=60, deadline=None)
@given(datasets(max_questions=50), st.sampled_from(["cross", "within", "all"]))
def test_qq_pairs_equal_brute_force(ds, mode):
    pairs = derive_qq_pairs(ds, mode=mode)
    got = {(p.id_a, p.id_b): p.label for p in pairs}
    assert len(got) == len(pairs)
    assert got == qq_pairs(ds, mode)
    assert all(p.id_a != p.id_b for p in pairs)
    assert len({frozenset((p.id_a, p.id_b)) for p in pairs}) == len(pairs)


def test_qq_ignores_test_split():
    ds = make_dataset([
        ("q1", "x", "train", [("a1", "same", 1)]),
        ("q2", "y", "test", [("a2", "same", 1), ("a3", "other", 0)]),
    ])
    assert derive_qq_pairs(ds, mode="all") == []


# --- AA pairs -----------------------------------------------------------------


def test_aa_duplicate_group_positive():
    ds = make_dataset([
        ("q1", "who wrote it", "train", [("a1", "x", 1)]),
        ("q2", "who wrote it", "train", [("a2", "y", 1)]),
    ])
    pairs = derive_aa_pairs(ds)
    assert [(p.id_a, p.id_b, p.label) for p in pairs] == [("a1", "a2", 1)]


def test_aa_unique_questions_negative():
    ds = make_dataset([
        ("q1", "who wrote it", "train", [("a1", "x", 1)]),
        ("q2", "who read it", "train", [("a2", "y", 1)]),
    ])
    pairs = derive_aa_pairs(ds)
    assert [(p.id_a, p.id_b, p.label) for p in pairs] == [("a1", "a2", 0)]


def test_aa_duplicate_with_two_and_three_answers():
    ds = make_dataset([
        ("q1", "same text", "train", [("a1", "u", 1), ("a2", "v", 0)]),
        ("q2", "same text", "dev", [("b1", "w", 1), ("b2", "x", 0), ("b3", "y", 0)]),
    ])
    pos = {(p.id_a, p.id_b) for p in derive_aa_pairs(ds) if p.label == 1}
    answers = [("a1", "q1"), ("a2", "q1"), ("b1", "q2"), ("b2", "q2"), ("b3", "q2")]
    oracle = {(x, y) for (x, qx), (y, qy) in itertools.combinations(answers, 2) if qx != qy}
    assert pos == oracle
    assert len(pos) == 6


dup_texts = st.sampled_from(["alpha", "beta", "gamma", "delta beta"])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_aa_pairs_equal_brute_force(data):
    n = data.draw(st.integers(1, 15))
    layout = []
    for i in range(n):
        k = data.draw(st.integers(1, 3))
        layout.append((f"q{i}", data.draw(dup_texts), data.draw(st.sampled_from(["train", "dev", "test"])),
                     [(f"q{i}a{j}", "ans", 1) for j in range(k)]))
    ds = make_dataset(layout)
    pos, neg = aa_pairs(ds)
    pairs = derive_aa_pairs(ds, neg_cap=10**9)
    got_pos = {(p.id_a, p.id_b) for p in pairs if p.label == 1}
    got_neg = {(p.id_a, p.id_b) for p in pairs if p.label == 0}
    assert got_pos == pos
    assert got_neg == neg
    assert len(pairs) == len(got_pos) + len(got_neg)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(0, 3))
def test_aa_negative_cap_is_seeded_subset(seed, n_dup):
    layout = [(f"u{i}", f"unique {i}", "train", [(f"u{i}a{j}", "x", 1) for j in range(3)]) for i in range(12)]
    for i in range(n_dup):
        layout.append((f"d{i}a", f"dup {i}", "train", [(f"d{i}x", "y", 1)]))
        layout.append((f"d{i}b", f"dup {i}", "dev", [(f"d{i}y", "z", 1)]))
    ds = make_dataset(layout)
    _, universe = aa_pairs(ds)
    pairs = derive_aa_pairs(ds, neg_ratio=2, seed=seed)
    neg = [(p.id_a, p.id_b) for p in pairs if p.label == 0]
    n_pos = sum(p.label for p in pairs)
    assert n_pos == n_dup
    assert len(neg) == min(len(universe), math.ceil(2 * max(n_pos, 1)))
    assert set(neg) <= universe
    assert len(set(neg)) == len(neg)
    assert pairs == derive_aa_pairs(ds, neg_ratio=2, seed=seed)


def test_pairs_tsv_is_deterministic(tmp_path):
    ds = _paris_fixture()
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_pairs_tsv(derive_qq_pairs(ds, mode="all"), a)
    write_pairs_tsv(derive_qq_pairs(ds, mode="all"), b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "q1\tq2\t1"
