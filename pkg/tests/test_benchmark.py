from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from helpers import FIXTURES

from chronokg.benchmark import (BenchmarkQuestion, BenchmarkSources, Score, TaskType, calibrated_onset_score,
                                generate_questions, load_questions, onset_tolerance, parse_age_range,
                                qc_questions, score_answer, verify_gold, write_benchmark)
from chronokg.errors import DomainError
from chronokg.quality import SchemaIndex
from chronokg.validation import GoldRecord, GoldSource, PhenopacketCase

ONSETS = [(0, 0), (0, 1), (1, 5), (2, 4), (6, 10), (5, 11), (12, 16), (13, 17), (20, 40), (25, 50),
          (65, 80), (70, 90), (0, 18), (3, 30)]


def _sources():
    gold = [GoldRecord(GoldSource.ORPHADATA, f"cond q{i:02d}", lo, hi) for i, (lo, hi) in enumerate(ONSETS)]
    hpoa = [GoldRecord(GoldSource.HPOA, f"cond q{i:02d}", lo, hi) for i, (lo, hi) in enumerate(ONSETS)]
    cases = [PhenopacketCase(f"c{i}", f"cond q{i % 3:02d}", "seizures", float(i)) for i in range(9)]
    return BenchmarkSources(gold=gold, hpoa=hpoa, phenopackets=cases,
                            schema=SchemaIndex.load(FIXTURES / "schema_snapshot.tsv"))


@pytest.mark.parametrize("text,expected", [
    ("2-5 years", (2.0, 5.0)),
    ("between 3 and 6 years", (3.0, 6.0)),
    ("around 7 years of age", (7.0, 7.0)),
    ("6 to 18 months", (0.5, 1.5)),
    ("10 to 4 years", (4.0, 10.0)),
    ("no numbers", None),
])
def test_parse_age_range(text, expected):
    assert parse_age_range(text) == expected


@given(st.floats(0, 100), st.floats(0, 100))
def test_onset_tolerance_bounds(a, b):
    lo, hi = sorted((a, b))
    tol = onset_tolerance((lo, hi))
    assert 0.5 <= tol <= 2.0
    assert tol == pytest.approx(min(2.0, max(0.5, (hi - lo) / 2)))


def test_calibrated_onset_score():
    assert calibrated_onset_score((6, 7), (2, 5))[0] is Score.CORRECT
    assert calibrated_onset_score((8, 9), (2, 5))[0] is Score.INCORRECT
    score, diags = calibrated_onset_score("in early childhood", (1, 5))
    assert score is Score.CORRECT and diags == ["era-keyword:early_childhood"]
    assert calibrated_onset_score("in adulthood", (1, 5))[0] is Score.INCORRECT
    assert calibrated_onset_score("unknown", (1, 5)) == (Score.INCORRECT, ["unparseable-range"])


def _q(fmt, gold, options=None, task="temporal_window"):
    return BenchmarkQuestion("q", "tier1", task, "p", options, gold, {}, "easy", fmt)


@pytest.mark.parametrize("q,answer,score", [
    (_q("mcq", {"answer": "B"}, ("x", "y", "z")), "(B) y", Score.CORRECT),
    (_q("mcq", {"answer": "B"}, ("x", "y", "z")), "A", Score.INCORRECT),
    (_q("mcq", {"answer": "B"}, ("x", "y", "z")), "Y", Score.CORRECT),
    (_q("mcq", {"answer": "B"}, ("x", "y", "z")), "perhaps", Score.UNPARSEABLE),
    (_q("yesno", {"answer": "No"}), "No, it is not.", Score.CORRECT),
    (_q("yesno", {"answer": "No"}), "Yes.", Score.INCORRECT),
    (_q("yesno", {"answer": "No"}), "Maybe", Score.UNPARSEABLE),
    (_q("text", {"answer": "Fabry Disease"}), "Fabry disease has the earlier onset", Score.CORRECT),
    (_q("text", {"answer": "Fabry Disease"}), "Pompe disease", Score.INCORRECT),
    (_q("onset", {"answer": "2-5 years", "range": [2, 5]}), "about 4 years", Score.CORRECT),
    (_q("ordering", {"answer": "", "ordering": ["a", "b", "c"]}), "a -> b -> c", Score.CORRECT),
    (_q("ordering", {"answer": "", "ordering": ["a", "b", "c"]}), "b, a, c", Score.INCORRECT),
    (_q("ordering", {"answer": "", "ordering": ["a", "b", "c"]}), "a", Score.UNPARSEABLE),
    (_q("list", {"answer": "", "items": ["ptosis", "scoliosis"]}), "Scoliosis and ptosis", Score.CORRECT),
    (_q("list", {"answer": "", "items": ["ptosis", "scoliosis"]}), "ptosis", Score.INCORRECT),
    (_q("yesno", {"answer": "Yes"}), None, Score.UNPARSEABLE),
])
def test_score_answer(q, answer, score):
    assert score_answer(q, answer) is score


def test_question_invariants():
    with pytest.raises(DomainError):
        _q("mcq", {"answer": "D"}, ("x", "y"))
    with pytest.raises(DomainError):
        BenchmarkQuestion("q", "tier2", "stage_conditional", "p", None, {"answer": "a"}, {}, "hard", "list")
    with pytest.raises(DomainError):
        score_answer(_q("bogus", {"answer": "a"}), "a")


@pytest.mark.parametrize("task", [t for t in TaskType if t not in (TaskType.PHENOTYPE_ORDERING,
                                                                   TaskType.STAGE_CONDITIONAL)])
def test_generators_deterministic_and_verified(task):
    first = generate_questions(task, _sources(), 6, seed=3).questions
    again = generate_questions(task, _sources(), 6, seed=3).questions
    assert first and first == again
    assert verify_gold(first, _sources()) == []


def test_seed_changes_output():
    a = generate_questions(TaskType.TEMPORAL_DIFFERENTIAL, _sources(), 6, seed=1).questions
    b = generate_questions(TaskType.TEMPORAL_DIFFERENTIAL, _sources(), 6, seed=2).questions
    assert [q.prompt for q in a] != [q.prompt for q in b]


def test_generator_shortfall_warns():
    res = generate_questions(TaskType.CROSS_DISEASE_COMPARISON, _sources(), 10_000, seed=0)
    assert res.warnings and len(res.questions) < 10_000
    assert generate_questions(TaskType.PHENOTYPE_ORDERING, _sources(), 3, seed=0).questions == []


def test_window_answers_match_probe():
    for q in generate_questions(TaskType.TEMPORAL_WINDOW, _sources(), 12, seed=5).questions:
        lo, hi = q.gold["range"]
        assert (q.answer == "Yes") == (lo < q.gold["probe"] < hi)


def test_verify_gold_detects_tampering():
    [q] = generate_questions(TaskType.TEMPORAL_WINDOW, _sources(), 1, seed=0).questions
    flipped = BenchmarkQuestion.from_dict({**q.to_dict(), "gold": {**q.gold, "answer":
                                                                   "No" if q.answer == "Yes" else "Yes"}})
    assert verify_gold([flipped], _sources()) == [q.id]


def test_qc_removals():
    boundary = _q("yesno", {"answer": "Yes", "probe": 2.0, "range": [2, 5]})
    dup = _q("mcq", {"answer": "A", "era": "infancy", "option_ranges": []}, ("x", "X"), "temporal_differential")
    tied = _q("ordering", {"answer": "", "ordering": ["a", "b"], "onsets": [[1, 2], [1, 3]]},
              task="phenotype_ordering")
    overlap = _q("text", {"answer": "a", "ranges": {"a": [1, 5], "b": [4, 9]}}, ("a", "b"),
                 "cross_disease_comparison")
    kept, removed = qc_questions([boundary, dup, tied, overlap])
    assert kept == []
    assert [r.reason for r in removed] == ["boundary-probe", "duplicate-options", "tied-ordering",
                                           "overlapping-ranges"]


def test_write_and_load_round_trip(tmp_path):
    qs = []
    for task in (TaskType.TEMPORAL_WINDOW, TaskType.STATIC_GENE, TaskType.NEGATIVE_TEMPORAL):
        qs += generate_questions(task, _sources(), 3, seed=0).questions
    paths = write_benchmark(qs, tmp_path)
    names = sorted(p.relative_to(tmp_path).as_posix() for p in paths)
    assert names == ["benchmark.json", "shards/static_gene.jsonl", "shards/temporal_window.jsonl",
                     "supplementary_negative_temporal.json"]
    main = load_questions(tmp_path / "benchmark.json")
    assert main == [q for q in qs if q.tier != "supplementary"]
    assert load_questions(tmp_path / "shards" / "static_gene.jsonl") == [q for q in qs if q.task_type == "static_gene"]
