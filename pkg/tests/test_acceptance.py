"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the summary lines appear at the
end of the session) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import filecmp
import itertools
import json
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import run_cli
from helpers import (FIXTURE_DISEASES, FIXTURES, oracle_bootstrap, oracle_components, oracle_ratio,
                     oracle_t_two_sided, raw, triple)

from chronokg import benchmark as bench
from chronokg.consensus import CONFIDENCE_RANK, QUARANTINE, compute_consensus, normalize, relation_canonical
from chronokg.evaluation import rag
from chronokg.evaluation.stats import bootstrap_ci, mcnemar_exact, paired_t
from chronokg.evaluation.transe import (LPTriple, TransEParams, ablation_run, augment_temporal,
                                        evaluate_ranking, split_indices, train_transe)
from chronokg.model import TemporalTriple
from chronokg.quality import CredibilitySignals, credibility_score
from chronokg.store import TemporalKG, load_tier
from chronokg.validation import (GoldRecord, GoldSource, JudgeVerdict, PhenopacketCase, TaxonomyVerdict,
                                 Verdict, accuracy_metrics, aggregate_verdicts, classify_discrepancy,
                                 coverage_gap)


def criterion(record_property, number: int, title: str) -> None:
    record_property("acceptance", f"{number:>2} {title}")


# ---------------------------------------------------------------------------
# 1. consensus matches a brute-force oracle
# ---------------------------------------------------------------------------

SUBJECTS = ["Duchenne muscular dystrophy", "Duchenne muscular dystrophies", "duchene muscular dystrophy",
            "Becker muscular dystrophy", "Becker dystrophy", "Kleefstra syndrome", "Kleefstra syndrom"]
OBJECTS = ["cardiomyopathy", "dilated cardiomyopathy", "cardiomyopathies", "Gowers sign", "Gower sign",
           "hypotonia", "muscle hypotonia", "speech delay", "delayed speech"]
RELATIONS = ["disease_phenotype_positive", "has_phenotype", "disease_protein", "causes", "treats"]
MODELS = ["m1", "m2", "m3", "m4"]


def _oracle_consensus(cands, threshold: int, fuzzy: int, total: int):
    rel = [relation_canonical(c.relation) for c in cands]
    edges = [
        (i, j) for i, j in itertools.combinations(range(len(cands)), 2)
        if rel[i] == rel[j] and rel[i] != QUARANTINE and cands[i].model != cands[j].model
        and oracle_ratio(normalize(cands[i].subject), normalize(cands[j].subject)) >= fuzzy
        and oracle_ratio(normalize(cands[i].object), normalize(cands[j].object)) >= fuzzy
    ]
    out = set()
    for comp in oracle_components(len(cands), edges):
        models = tuple(sorted({cands[i].model for i in comp}))
        if len(models) < threshold:
            continue
        rep = min(comp, key=lambda i: (-CONFIDENCE_RANK[cands[i].confidence], cands[i].model, cands[i].subject,
                                       cands[i].object, cands[i].relation, cands[i].evidence_text))
        out.add((cands[rep].evidence_text, models, len(comp), round(len(models) / total, 9)))
    return out


def _random_candidates(rng: random.Random):
    per_model = {m: [] for m in MODELS[: rng.randint(2, 4)]}
    for k in range(rng.randint(0, 30)):
        m = rng.choice(sorted(per_model))
        per_model[m].append(raw(rng.choice(SUBJECTS), rng.choice(OBJECTS), m, relation=rng.choice(RELATIONS),
                                confidence=rng.choice(["high", "medium", "low"]), evidence=f"ev{k}"))
    return per_model


def test_c01_consensus_matches_oracle(record_property):
    criterion(record_property, 1, "consensus equals brute-force oracle on 200 sets; t=3 subset of t=2; < 10 s")
    rng = random.Random(2024)
    sets = [_random_candidates(rng) for _ in range(200)]
    t0 = time.perf_counter()
    results = {t: [compute_consensus(pm, threshold=t, fuzzy_threshold=80) for pm in sets] for t in (2, 3)}
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    for pm, c2, c3 in zip(sets, results[2], results[3]):
        cands = [t for m in sorted(pm) for t in pm[m]]
        for thr, got in ((2, c2), (3, c3)):
            mine = {(c.evidence_text, c.agreeing_models, c.cluster_members, round(c.consensus_confidence, 9))
                    for c in got}
            assert mine == _oracle_consensus(cands, thr, 80, len(pm))
        assert {c.evidence_text for c in c3} <= {c.evidence_text for c in c2}


# ---------------------------------------------------------------------------
# 2. confidence values
# ---------------------------------------------------------------------------


def test_c02_confidence_values(record_property):
    criterion(record_property, 2, "three-model agreement gives 1.00, two of three gives 0.67")
    same = {m: [raw("Duchenne muscular dystrophy", "cardiomyopathy", m)] for m in ("m1", "m2", "m3")}
    [c] = compute_consensus(same)
    assert c.consensus_confidence == 1.0
    two = dict(same, m3=[raw("Kleefstra syndrome", "hypotonia", "m3")])
    [c] = compute_consensus(two)
    assert round(c.consensus_confidence, 2) == 0.67
    assert abs(c.consensus_confidence - 0.67) <= 0.005


# ---------------------------------------------------------------------------
# 3. credibility
# ---------------------------------------------------------------------------

SIGNALS = ("journal_tier", "citation_velocity", "study_type_weight", "replication_signal", "retraction_check",
           "llm_consensus")


def test_c03_credibility(record_property):
    criterion(record_property, 3, "credibility 1.0 at maximum, 0.275 for review plus consensus, monotone")
    assert credibility_score(CredibilitySignals(**{s: 1.0 for s in SIGNALS})) == 1.0
    assert credibility_score(CredibilitySignals(study_type_weight=0.5, llm_consensus=1.0)) == 0.275
    rng = random.Random(7)
    for _ in range(1000):
        base = {s: (None if rng.random() < 0.2 else rng.random()) for s in SIGNALS}
        name = rng.choice(SIGNALS)
        before = base[name] or 0.0
        bumped = dict(base, **{name: rng.uniform(before, 1.0)})
        assert credibility_score(CredibilitySignals(**bumped)) >= credibility_score(CredibilitySignals(**base))


# ---------------------------------------------------------------------------
# 4. taxonomy
# ---------------------------------------------------------------------------


def _cases():
    """One disease shape per taxonomy category: (triples, gold range, expected verdict)."""
    def t(name, *ranges):
        return [triple(name, f"phenotype {i}", r, pmid=f"PMID:{i}") for i, r in enumerate(ranges)]
    return {
        TaxonomyVerdict.CONTAINED: (t("contained", (2, 5)), (1, 5)),
        TaxonomyVerdict.ADJACENT_STAGE: (t("adjacent", (12, 16)), (5, 10)),
        TaxonomyVerdict.GRANULARITY_MISMATCH: (t("granular", (2, 5), (10, 18), (12, 20)), (1, 5)),
        TaxonomyVerdict.WIDER_BUT_OVERLAPS: (t("wider", (0, 40)), (5, 12)),
        TaxonomyVerdict.SINGLE_TRIPLE_NOISE: (t("noise", *([(2, 8)] * 49 + [(60, 60)])), (1, 10)),
        TaxonomyVerdict.GENUINELY_WRONG: (t("wrong", (30, 60)), (0, 1)),
    }


# rounded counts of the reported fractions over 2563 matched diseases; the
# reported fractions sum to 99.2%, the remainder goes to the catch-all
COHORT = {
    TaxonomyVerdict.CONTAINED: 1284,
    TaxonomyVerdict.ADJACENT_STAGE: 400,
    TaxonomyVerdict.GRANULARITY_MISMATCH: 354 + 20,
    TaxonomyVerdict.WIDER_BUT_OVERLAPS: 172,
    TaxonomyVerdict.SINGLE_TRIPLE_NOISE: 146,
    TaxonomyVerdict.GENUINELY_WRONG: 187,
}


def test_c04_taxonomy(record_property):
    criterion(record_property, 4, "cohort reproduces 92.7% effective accuracy; worked examples classify")
    cases = _cases()
    for expected, (rows, gold) in cases.items():
        assert classify_discrepancy(rows, gold) is expected, expected
    verdicts = []
    for verdict, count in COHORT.items():
        rows, gold = cases[verdict]
        got = classify_discrepancy(rows, gold)
        verdicts.extend([got] * count)
    m = accuracy_metrics(verdicts)
    assert m.n == 2563
    assert round(100 * m.effective_accuracy, 1) == 92.7
    assert round(100 * m.strict_precision, 1) == 50.1
    # worked examples
    dmd = [triple("Duchenne muscular dystrophy", "walking delay", (2, 5))]
    assert classify_discrepancy(dmd, (1, 5)) is TaxonomyVerdict.CONTAINED
    noisy = [triple("x", f"p{i}", (2, 8), pmid=f"PMID:{i}") for i in range(49)]
    noisy.append(triple("x", "p49", (60, 60), pmid="PMID:49"))
    assert classify_discrepancy(noisy, (2, 8)) is TaxonomyVerdict.SINGLE_TRIPLE_NOISE
    assert classify_discrepancy(noisy, (1, 10)) is TaxonomyVerdict.SINGLE_TRIPLE_NOISE
    wrong = [triple("y", "p", (30, 60))]
    assert classify_discrepancy(wrong, (0, 1)) is TaxonomyVerdict.GENUINELY_WRONG


# ---------------------------------------------------------------------------
# 5. judge panel aggregation
# ---------------------------------------------------------------------------


def test_c05_panel_accuracy(record_property):
    criterion(record_property, 5, "76/4/11/3 majority with 6 splits gives 80/91 = 87.9%")
    items = {}
    judges = ("j1", "j2", "j3")

    def add(prefix, n, votes):
        for i in range(n):
            items[f"{prefix}{i:03d}"] = [JudgeVerdict(j, v, "") for j, v in zip(judges, votes)]

    S, P, N, U = Verdict.SUPPORTED, Verdict.PARTIALLY_SUPPORTED, Verdict.NOT_SUPPORTED, Verdict.UNVERIFIABLE
    add("s", 76, (S, S, S))
    add("p", 4, (P, P, S))
    add("n", 11, (N, N, N))
    add("u", 3, (U, U, N))
    add("x", 6, (S, N, U))
    report = aggregate_verdicts(items)
    assert report.n == 100 and report.splits == 6
    assert report.majority_counts == {"supported": 76, "partially_supported": 4, "not_supported": 11,
                                      "unverifiable": 3}
    assert report.verified_accuracy == pytest.approx(80 / 91)
    assert round(100 * report.verified_accuracy, 1) == 87.9


# ---------------------------------------------------------------------------
# 6. coverage gap
# ---------------------------------------------------------------------------


def test_c06_coverage(record_property):
    criterion(record_property, 6, "coverage table reproduces the reported counts and percentages")
    names = [f"cond q{i:05d}" for i in range(17080)]
    resources = {"HPOA": names[:1429], "Phenopackets": names[:518], "Orphadata": names[:5796]}
    kg = names[5796 - 2685 : 5796 + 6250]
    table = coverage_gap(kg, resources, names)
    got = {r.resource: (r.count, r.percent) for r in table.rows}
    assert table.universe == 17080
    assert got == {"HPOA": (1429, 8.4), "Phenopackets": (518, 3.0), "Orphadata": (5796, 33.9),
                   "ChronoKG": (8935, 52.3)}
    assert (table.novel.count, table.novel.percent) == (6250, 36.6)


# ---------------------------------------------------------------------------
# 7. benchmark determinism and gold verification
# ---------------------------------------------------------------------------


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and not p.name.startswith("manifest_")}


def test_c07_benchmark(record_property, fixture_store, tmp_path):
    criterion(record_property, 7, "bench gen is byte-identical under seed 42; tier1 gold re-derives")
    kg = fixture_store / "validated_triples.jsonl"
    for out in ("a", "b"):
        r = run_cli("bench", "gen", "--seed", "42", "--kg", str(kg), "--out", str(tmp_path / out))
        assert r.exit_code == 0, r.output
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a and a == b
    qc = json.loads(a["qc_report.json"])
    assert qc["gold_mismatches"] == []
    questions = bench.load_questions(tmp_path / "a" / bench.BENCHMARK_FILE)
    assert any(q.tier == "tier1" for q in questions)
    # a probe at 8 against a 0-2 window is outside it
    # two records so that the alternating generator also draws outside probes
    gold = [GoldRecord(GoldSource.ORPHADATA, name, 0, 2) for name in ("Example disease", "Other disease")]
    sources = bench.BenchmarkSources(gold=gold)
    found = []
    for seed in range(200):
        for q in bench.generate_questions("temporal_window", sources, 2, seed).questions:
            if q.gold["probe"] == 8.0:
                found.append(q)
    assert found and all(q.answer == "No" for q in found)
    assert bench.verify_gold(found, sources) == []
    assert bench.score_answer(found[0], "No") is bench.Score.CORRECT


# ---------------------------------------------------------------------------
# 8. calibrated onset scoring
# ---------------------------------------------------------------------------


def test_c08_calibrated_scoring(record_property):
    criterion(record_property, 8, "calibrated onset scoring accepts (0,3), rejects (30,40); tolerance sweep")
    correct = bench.Score.CORRECT
    assert bench.calibrated_onset_score((0, 3), (0, 2.7))[0] is correct
    assert bench.calibrated_onset_score((30, 40), (0, 2.7))[0] is not correct
    for width, tol in {0: 0.5, 1: 0.5, 3: 1.5, 4: 2.0, 10: 2.0}.items():
        gold = (20.0, 20.0 + width)
        assert bench.onset_tolerance(gold) == tol
        edge = gold[1] + tol
        assert bench.calibrated_onset_score((edge, edge + 1), gold)[0] is correct
        assert bench.calibrated_onset_score((edge + 0.01, edge + 1), gold)[0] is not correct
        low = gold[0] - tol
        assert bench.calibrated_onset_score((low - 1, low), gold)[0] is correct
        assert bench.calibrated_onset_score((low - 1, low - 0.01), gold)[0] is not correct


# ---------------------------------------------------------------------------
# 9. long-tail rescue
# ---------------------------------------------------------------------------


def _rescue_fixture():
    cases, kg_rows = [], []
    for i in range(35):
        disease = f"Rare condition {chr(65 + i // 26)}{chr(65 + i % 26)}"
        lo, hi = 1 + i % 7, 4 + i % 7
        cases += [PhenopacketCase(f"PP-{i:03d}-a", disease, "seizures", float(lo)),
                  PhenopacketCase(f"PP-{i:03d}-b", disease, "seizures", float(hi))]
        if i < 21:
            kg_rows.append(triple(disease, "seizures", (lo, hi), pmid=f"PMID:{40000000 + i}"))
    questions = bench.generate_questions("phenopackets_onset", bench.BenchmarkSources(phenopackets=cases), 35,
                                         42).questions
    return questions, rag.RagSources(kg=TemporalKG(kg_rows))


def test_c09_rescue(record_property):
    criterion(record_property, 9, "35 no-retrieval failures with 21 rescued gives 60%; CI reproducible")
    questions, sources = _rescue_fixture()
    assert len(questions) == 35
    provider = rag.MockRagProvider()
    nr = rag.run_condition(questions, provider, rag.Condition.NR, sources)
    chrono = rag.run_condition(questions, provider, rag.Condition.CHRONO_KG, sources)
    first = rag.rescue_rate(nr, chrono, seed=42)
    second = rag.rescue_rate(nr, chrono, seed=42)
    assert (first.n_fail, first.rescued) == (35, 21)
    assert first.rate == pytest.approx(0.60)
    assert first.ci == second.ci
    assert first.ci[0] <= 0.6 <= first.ci[1]


# ---------------------------------------------------------------------------
# 10. statistics against independent oracles
# ---------------------------------------------------------------------------


def test_c10_statistics(record_property):
    criterion(record_property, 10, "McNemar(10,0)=0.001953; bootstrap and paired t match oracles")
    assert round(mcnemar_exact(10, 0), 6) == 0.001953
    rng = random.Random(11)
    vectors = [[float(rng.random() < p) for _ in range(n)] for p, n in ((0.6, 35), (0.3, 50), (0.9, 20))]
    vectors += [[rng.gauss(0, 1) for _ in range(40)], [rng.uniform(0, 5) for _ in range(12)]]
    for v in vectors:
        got = bootstrap_ci(v, resamples=2000, seed=42)
        want = oracle_bootstrap(v, 2000, 42, 0.95)
        assert got == pytest.approx(want, abs=1e-12)
    for _ in range(5):
        n = rng.randint(3, 12)
        a = [rng.uniform(0, 1) for _ in range(n)]
        b = [x + rng.gauss(0.05, 0.1) for x in a]
        d = np.subtract(a, b)
        t = d.mean() / (d.std(ddof=1) / np.sqrt(n))
        assert paired_t(a, b) == pytest.approx(oracle_t_two_sided(float(t), n - 1), abs=1e-6)


# ---------------------------------------------------------------------------
# 11. temporal link prediction
# ---------------------------------------------------------------------------

BIN_AGES = [(0, 0.05), (0.2, 0.8), (2, 4), (6, 9), (11, 15), (20, 35), (45, 55), (65, 80)]


def synthetic_kg() -> list[LPTriple]:
    """20 diseases with 10 phenotypes each; phenotype j always has onset in bin j mod 8."""
    out = []
    for i in range(20):
        for k in range(10):
            j = (3 * i + k) % 40
            out.append(LPTriple(f"disease_{i:02d}", "has_phenotype", f"phenotype_{j:02d}", BIN_AGES[j % 8]))
    return out


def test_c11_link_prediction(record_property):
    criterion(record_property, 11, "temporal MRR beats structural on seeds 42/7/123; runs < 60 s; filtered >= raw")
    kg = synthetic_kg()
    assert len(kg) == 200
    struct, temporal = augment_temporal(kg, "none"), augment_temporal(kg, "fine8")
    report = ablation_run(struct, temporal, seeds=(42, 7, 123))
    assert all(r < 60.0 for r in report.runtime_s)
    for mode in ("raw", "filtered"):
        for s, t in zip(report.per_seed["struct"][mode], report.per_seed["temporal"][mode]):
            assert t["mrr"] > s["mrr"]
    for cond in ("struct", "temporal"):
        for raw_m, filt_m in zip(report.per_seed[cond]["raw"], report.per_seed[cond]["filtered"]):
            assert filt_m["mrr"] >= raw_m["mrr"]
    # filtered >= raw also holds for a single model evaluated both ways
    train_idx, _, test_idx = split_indices(len(temporal), 42)
    model = train_transe([temporal[i] for i in train_idx], TransEParams(epochs=20), 42,
                         entities=[x for h, _, t in temporal for x in (h, t)], relations=[r for _, r, _ in temporal])
    test = [temporal[i] for i in test_idx]
    assert evaluate_ranking(model, test, temporal, "filtered")["mrr"] >= evaluate_ranking(model, test, temporal,
                                                                                         "raw")["mrr"]


# ---------------------------------------------------------------------------
# 12. end-to-end pipeline on the fixtures
# ---------------------------------------------------------------------------


def test_c12_pipeline_end_to_end(record_property, fixture_store, tmp_path):
    criterion(record_property, 12, "fixture pipeline: PMIDs, evidence <= 300 chars, conservation, byte-identical")
    records = load_tier(fixture_store / "validated_triples.jsonl", "validated").records
    assert records
    for t in records:
        assert t.evidence.source_ids and all(p.startswith("PMID:") for p in t.evidence.source_ids)
        assert len(t.evidence.evidence_text) <= 300
    for did in FIXTURE_DISEASES:
        report = json.loads((fixture_store / "diseases" / did.replace(":", "_") / "report.json").read_text())
        c = report["counts"]
        assert c["validated"] + c["rejected"] == c["consensus"]
        assert c["merged"] > 0
    argv = ["pipeline", "run", "--store", str(tmp_path)]
    for d in FIXTURE_DISEASES:
        argv += ["--disease", d]
    assert run_cli(*argv).exit_code == 0
    first = _tree(tmp_path)
    assert first == _tree(fixture_store)
    assert run_cli(*argv).exit_code == 0
    assert _tree(tmp_path) == first
    assert filecmp.cmp(tmp_path / "validated_triples.jsonl", fixture_store / "validated_triples.jsonl",
                       shallow=False)


# ---------------------------------------------------------------------------
# 13. released record
# ---------------------------------------------------------------------------


def test_c13_released_record(record_property):
    criterion(record_property, 13, "released example record round-trips with onset (20, 40) and stage adult")
    # the record carries a literal newline inside a string, so parse non-strictly
    data = json.loads((FIXTURES / "released_record.json").read_text(encoding="utf-8"), strict=False)
    t = TemporalTriple.from_dict(data)
    assert t.temporal.onset == (20, 40)
    assert t.temporal.progression_stage == "adult"
    assert TemporalTriple.from_dict(json.loads(json.dumps(t.to_dict()))) == t


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
