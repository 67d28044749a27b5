from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from helpers import FIXTURES, triple

from chronokg.errors import DomainError, TransportError
from chronokg.validation import (GoldRecord, GoldSource, MockJudge, NovelCandidate, PhenopacketCase,
                                 TaxonomyVerdict, Verdict, accuracy_metrics, allocate, build_judge_prompt,
                                 category_range, classify_discrepancy, containment, format_claim, judge_pair,
                                 keyword_span_length, load_gold_table, load_phenopackets, match_diseases,
                                 normalize_disease_name, parse_age, parse_judge_response, phenopackets_gold,
                                 run_panel, sample_novel, select_triple)


@pytest.mark.parametrize("name,key", [
    ("Duchenne Muscular Dystrophy", "duchenne muscular dystrophy"),
    ("Kleefstra syndrome 1", "kleefstra"),
    ("Fabry disease", "fabry"),
    ("Alport syndrome, X-linked", "alport syndrome x linked"),
])
def test_normalize_disease_name(name, key):
    assert normalize_disease_name(name) == key


def test_category_range():
    assert category_range("Childhood") == (1.0, 11.0)
    assert category_range("adult onset") == (18.0, 65.0)
    assert category_range("All ages") == (0.0, 120.0)
    with pytest.raises(DomainError):
        category_range("sometime")


def test_load_gold_tables():
    orpha = {g.disease: g.onset for g in load_gold_table(FIXTURES / "gold" / "orphadata.tsv", "Orphadata")}
    assert orpha["Becker muscular dystrophy"] == (1.0, 65.0)
    assert orpha["Kleefstra syndrome"] == (0.0, 1.0)
    hpoa = {g.disease: g.onset for g in load_gold_table(FIXTURES / "gold" / "hpoa.tsv", GoldSource.HPOA)}
    assert hpoa["Duchenne muscular dystrophy"] == (1.0, 5.0)


@pytest.mark.parametrize("value,years", [(7, 7.0), ("P5Y", 5.0), ("P6Y6M", 6.5), ("P3M", 0.25)])
def test_parse_age(value, years):
    assert parse_age(value) == years


def test_parse_age_rejects_garbage():
    with pytest.raises(DomainError):
        parse_age("five years")


def test_phenopackets_gold_fixture():
    gold = phenopackets_gold(load_phenopackets(FIXTURES / "gold" / "phenopackets.json"))
    by = {(g.disease, g.phenotype): g.onset for g in gold}
    assert by[("Duchenne muscular dystrophy", "Gowers sign")] == (5.0, 7.0)
    assert by[("Kleefstra syndrome", "Hypotonia")] == (0.25, 0.8333)


def test_match_diseases_flags_ambiguity():
    gold = [GoldRecord(GoldSource.HPOA, "Fabry disease", 1, 2), GoldRecord(GoldSource.HPOA, "Pompe disease", 0, 1),
            GoldRecord(GoldSource.HPOA, "Pompe", 20, 40)]
    res = match_diseases(["fabry", "Pompe disease", "Other"], gold)
    assert [(n, g.disease) for n, g in res.pairs] == [("fabry", "Fabry disease")]
    assert "Pompe disease" in res.ambiguous and res.unmatched == ["Other"]


def test_containment():
    assert containment((2, 5), (1, 5)) and not containment((0, 5), (1, 5))


def test_classify_requires_onset():
    with pytest.raises(DomainError):
        classify_discrepancy([triple("d", "p", None)], (1, 2))


@given(st.lists(st.sampled_from(list(TaxonomyVerdict)), min_size=1))
def test_accuracy_metrics_fractions_sum_to_one(verdicts):
    m = accuracy_metrics(verdicts)
    assert sum(m.fractions.values()) == pytest.approx(1.0)
    assert m.strict_precision <= m.effective_accuracy


@given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 30), min_size=1), st.data())
def test_allocate_properties(sizes, data):
    total = sum(sizes.values())
    n = data.draw(st.integers(0, total))
    alloc, _ = allocate(sizes, n)
    assert sum(alloc.values()) == n
    assert all(0 <= alloc[k] <= sizes[k] for k in sizes)


def test_allocate_reallocates_short_strata():
    alloc, warnings = allocate({"a": 1, "b": 100}, 50)
    assert sum(alloc.values()) == 50 and alloc["a"] <= 1
    with pytest.raises(DomainError):
        allocate({"a": 1}, 2)


def test_keyword_span_and_selection():
    assert keyword_span_length("Nothing here. Onset occurs at age 3 years; other") == len("Onset occurs at age 3 years")
    a = triple("d", "p1", (1, 2), pmid="PMID:1", evidence="no timing words")
    b = triple("d", "p2", (1, 2), pmid="PMID:2", evidence="symptoms begin in early childhood")
    assert select_triple([a, b]) == b
    assert select_triple([]) is None


def _population():
    out = []
    for i in range(30):
        onset = [(0, 1), (2, 5), (20, 40)][i % 3]
        rows = (triple(f"disease {i}", "p", onset, pmid=f"PMID:{i}", disease_id=f"X:{i}",
                       evidence="onset between 2 and 5 years"),)
        out.append(NovelCandidate(f"X:{i:02d}", f"disease {i}", ["Minimal", "Light"][i % 2], rows))
    return out


def test_sample_novel_is_seeded_and_stratified():
    first, _ = sample_novel(_population(), 12, seed=42)
    again, _ = sample_novel(_population(), 12, seed=42)
    other, _ = sample_novel(_population(), 12, seed=7)
    assert [p.disease_id for p in first] == [p.disease_id for p in again]
    assert [p.disease_id for p in first] != [p.disease_id for p in other]
    assert len(first) == 12 and len({p.stratum for p in first}) == 6


def test_judge_prompt_and_parsing():
    prompt = build_judge_prompt("c", "e")
    assert "early childhood 1-5 y" in prompt and "older adulthood >=65 y" in prompt
    assert parse_judge_response('{"verdict": "SUPPORTED", "quote": "q"}')[0] is Verdict.SUPPORTED
    v, _, diags = parse_judge_response("I think it is not_supported.")
    assert v is Verdict.NOT_SUPPORTED and diags == ["verdict-from-text"]
    assert parse_judge_response("???")[0] is Verdict.UNVERIFIABLE


@pytest.mark.parametrize("claim,evidence,verdict", [
    ((2, 5), "Weakness begins between 2 and 5 years.", Verdict.SUPPORTED),
    ((2, 8), "Weakness begins between 2 and 5 years.", Verdict.PARTIALLY_SUPPORTED),
    ((30, 40), "Weakness begins between 2 and 5 years.", Verdict.NOT_SUPPORTED),
    ((12, 16), "Symptoms appear in adolescence.", Verdict.SUPPORTED),
    ((1, 2), "Weakness is common.", Verdict.UNVERIFIABLE),
])
def test_mock_judge(claim, evidence, verdict):
    jv = judge_pair(format_claim("D", "weakness", claim), evidence, MockJudge("j"))
    assert jv.verdict is verdict and jv.judge == "j"


class _Broken:
    name = "broken"

    def complete(self, prompt, **kw):
        raise TransportError("down")


def test_panel_excludes_items_missing_a_judge():
    pairs, _ = sample_novel(_population(), 3, seed=1)
    report = run_panel(pairs, [MockJudge("a"), MockJudge("b"), _Broken()])
    assert report.n == 0 and len(report.excluded) == 3
    full = run_panel(pairs, [MockJudge("a"), MockJudge("b"), MockJudge("c")])
    assert full.n == 3 and full.unanimous == 3
    assert "verified accuracy" in full.table()


def test_phenopacket_case_dataclass():
    c = PhenopacketCase("1", "d", "p", 2.0)
    assert phenopackets_gold([c])[0].onset == (2.0, 2.0)
