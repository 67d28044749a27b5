from __future__ import annotations

import random

import networkx as nx
from hypothesis import given, settings, strategies as st

from helpers import oracle_indel, oracle_ratio, raw, triple

from chronokg.consensus import (QUARANTINE, ConsensusTriple, UnionFind, compute_consensus, indel_distance,
                                merge_cross_document, normalize, normalize_entity, relation_canonical,
                                similarity_ratio)

short_text = st.text(alphabet="abcde ", max_size=12)


@given(short_text, short_text)
def test_indel_matches_dp_oracle(a, b):
    assert indel_distance(a, b) == oracle_indel(a, b)
    assert similarity_ratio(a, b) == oracle_ratio(a, b)


@given(short_text, short_text)
def test_similarity_symmetric_and_bounded(a, b):
    r = similarity_ratio(a, b)
    assert r == similarity_ratio(b, a) and 0 <= r <= 100
    assert similarity_ratio(a, a) == 100


def test_similarity_known_values():
    assert similarity_ratio("cardiomyopathy", "cardiomyopathies") == 87
    assert similarity_ratio("", "") == 100
    assert similarity_ratio("abc", "") == 0


def test_normalize_entity():
    assert normalize("Cardiomyopathy (dilated)") == "cardiomyopathy"
    assert normalize_entity("Seizures/Epilepsy") == ("seizures", ("epilepsy",))
    assert normalize("((a) b) c") == "c"
    assert normalize("  ") == ""


def test_relation_canonical():
    assert relation_canonical("disease_phenotype_positive") == "disease_phenotype_positive"
    assert relation_canonical("has phenotype") == relation_canonical("has_phenotype") != QUARANTINE
    assert relation_canonical("teleports to") == QUARANTINE
    assert relation_canonical("") == QUARANTINE


@given(st.integers(1, 25), st.lists(st.tuples(st.integers(0, 24), st.integers(0, 24)), max_size=40))
def test_union_find_matches_networkx(n, pairs):
    pairs = [(i % n, j % n) for i, j in pairs]
    uf = UnionFind(n)
    for i, j in pairs:
        uf.union(i, j)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(pairs)
    assert sorted(map(sorted, uf.groups())) == sorted(sorted(c) for c in nx.connected_components(g))


def test_same_model_never_clusters():
    pm = {"a": [raw("X", "y", "a", evidence="1"), raw("X", "y", "a", evidence="2")], "b": []}
    assert compute_consensus(pm) == []


def test_fuzzy_variants_cluster():
    pm = {"a": [raw("Duchenne muscular dystrophy", "cardiomyopathy", "a")],
          "b": [raw("duchenne muscular dystrophy (DMD)", "cardiomyopathies", "b", confidence="medium")]}
    [c] = compute_consensus(pm)
    assert c.agreeing_models == ("a", "b") and c.cluster_members == 2
    assert c.model == "a"  # higher confidence wins the representative slot


def test_total_models_counts_empty_model():
    pm = {"a": [raw("X", "y", "a")], "b": [raw("X", "y", "b")], "c": []}
    [c] = compute_consensus(pm)
    assert c.consensus_confidence == 2 / 3


def test_quarantined_relations_never_cluster():
    pm = {"a": [raw("X", "y", "a", relation="zaps")], "b": [raw("X", "y", "b", relation="zaps")]}
    assert compute_consensus(pm) == []


@settings(max_examples=50)
@given(st.randoms(use_true_random=False))
def test_consensus_independent_of_input_order(rnd: random.Random):
    pm = {
        "a": [raw("X", "y", "a", evidence="a1"), raw("Z", "w", "a", evidence="a2", confidence="low")],
        "b": [raw("X", "y", "b", evidence="b1"), raw("Z", "ww", "b", evidence="b2")],
        "c": [raw("X", "yy", "c", evidence="c1")],
    }
    shuffled = {m: rnd.sample(v, len(v)) for m, v in rnd.sample(list(pm.items()), len(pm))}
    assert compute_consensus(shuffled) == compute_consensus(pm)


def test_consensus_round_trip():
    pm = {m: [raw("X", "y", m, onset=(1, 2))] for m in ("a", "b")}
    [c] = compute_consensus(pm)
    assert ConsensusTriple.from_dict(c.to_dict()) == c


def test_merge_cross_document_appends_pmids():
    a = triple("D", "cardiomyopathy", (20, 40), pmid="PMID:1")
    b = triple("D", "Cardiomyopathy", (22, 38), pmid="PMID:2")
    c = triple("D", "cardiomyopathy", (60, 70), pmid="PMID:3")
    merged = merge_cross_document([a, b, c])
    assert len(merged) == 2
    assert merged[0].evidence.source_ids == ("PMID:1", "PMID:2")
    assert merged[0].temporal.onset == (20, 40)
    assert merged[1].evidence.source_ids == ("PMID:3",)


def test_merge_keeps_onsetless_separate_from_onset():
    a = triple("D", "p", None, pmid="PMID:1")
    b = triple("D", "p", (1, 2), pmid="PMID:2")
    c = triple("D", "p", None, pmid="PMID:3")
    merged = merge_cross_document([a, b, c])
    assert [m.evidence.source_ids for m in merged] == [("PMID:1", "PMID:3"), ("PMID:2",)]
