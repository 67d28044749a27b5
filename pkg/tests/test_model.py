from __future__ import annotations

import hashlib
import json

import pytest
from hypothesis import given, strategies as st

from helpers import triple

from chronokg.errors import DomainError
from chronokg.model import (DEFAULT_BIN_TABLE, AgeBin, DiseaseProfile, OnsetBinTable, PipelineConfig, StudyType,
                            TemporalContext, TemporalTriple, Tier, age_to_fine_bin, collapse_bin, edge_hash,
                            era_of_range, range_to_fine_bin)

ages = st.floats(min_value=0, max_value=120, allow_nan=False)


@st.composite
def age_ranges(draw):
    a, b = draw(ages), draw(ages)
    return (min(a, b), max(a, b))


def test_fine_bins_cover_age_axis():
    assert DEFAULT_BIN_TABLE.fine_names == ["neonatal", "infantile", "early_childhood", "childhood", "juvenile",
                                            "young_adult", "adult", "late_onset"]
    assert age_to_fine_bin(0) == "neonatal"
    assert age_to_fine_bin(0.08) == "infantile"
    assert age_to_fine_bin(5) == "childhood"
    assert age_to_fine_bin(120) == "late_onset"
    with pytest.raises(DomainError):
        age_to_fine_bin(121)


def test_coarse_collapse_has_five_bins():
    coarse = {collapse_bin(b) for b in DEFAULT_BIN_TABLE.fine_names}
    assert coarse == set(DEFAULT_BIN_TABLE.coarse_bins) and len(coarse) == 5
    assert collapse_bin("neonatal") == collapse_bin("infantile")
    with pytest.raises(DomainError):
        collapse_bin("teen")


def test_bin_table_rejects_gaps():
    with pytest.raises(DomainError):
        OnsetBinTable((AgeBin("a", 0, 10), AgeBin("b", 11, 120)), {"a": "x", "b": "x"}, ("x",), ())


@pytest.mark.parametrize("rng,era", [
    ((0, 0), "prenatal"), ((0, 0.5), "infancy"), ((2, 5), "early_childhood"), ((5, 10), "childhood"),
    ((12, 16), "adolescence"), ((30, 60), "adulthood"), ((70, 90), "older_adulthood"), ((1, 5), "early_childhood"),
])
def test_era_of_range(rng, era):
    assert era_of_range(*rng) == era


@given(age_ranges())
def test_era_touches_range(r):
    era = DEFAULT_BIN_TABLE.era(era_of_range(*r))
    assert era.lo <= r[1] and r[0] <= era.hi


@given(age_ranges())
def test_midpoint_bin_contains_midpoint(r):
    b = next(x for x in DEFAULT_BIN_TABLE.fine_bins if x.name == range_to_fine_bin(*r))
    mid = (r[0] + r[1]) / 2
    assert b.lo <= mid <= b.hi


def test_invalid_ranges_rejected():
    for bad in ((5, 2), (-1, 3), (0, 121)):
        with pytest.raises(DomainError):
            era_of_range(*bad)


def test_edge_hash_is_sha256_prefix():
    want = hashlib.sha256("a\tr\tb\tPMID:1".encode()).hexdigest()[:12]
    assert edge_hash("a", "r", "b", "PMID:1") == want
    assert edge_hash("a", "r", "b", "PMID:2") != want


def test_temporal_context_problems():
    assert TemporalContext(1, 5).problems() == []
    assert "min-exceeds-max" in TemporalContext(5, 1).problems()
    assert "age-bounds" in TemporalContext(0, 130).problems()
    assert "temporal-resolution" in TemporalContext(temporal_resolution="week").problems()
    assert not TemporalContext().is_temporal
    assert TemporalContext(progression_stage="late").is_temporal


def test_evidence_problems():
    t = triple("d", "p", (1, 2))
    assert t.evidence.problems() == []
    long = t.evidence.__class__(**{**t.evidence.__dict__, "evidence_text": "x" * 301, "source_ids": ()})
    assert set(long.problems()) == {"evidence-too-long", "no-provenance"}


@given(age_ranges(), st.sampled_from([None, "early", "late ambulatory"]), st.booleans())
def test_triple_round_trip(r, stage, with_year):
    t = triple("Some disease", "a phenotype", r, stage=stage, year=2010 if with_year else None)
    again = TemporalTriple.from_dict(json.loads(json.dumps(t.to_dict())))
    assert again == t
    assert list(t.to_dict()) == ["edge_id", "source_id", "source_type", "source_name", "relation", "target_id",
                                 "target_type", "target_name", "temporal", "evidence", "conditions",
                                 "extraction_date", "pipeline_version", "disease_profile_id", "quality_grade"]


def test_context_from_dict_keeps_integral_ages():
    tc = TemporalContext.from_dict({"onset_age_min": "3", "onset_age_max": 7, "unknown": 1})
    assert tc.onset == (3, 7) and isinstance(tc.onset_age_max, int)


def test_study_type_parse():
    assert StudyType.parse("Meta-Analysis") is StudyType.META_ANALYSIS
    assert StudyType.parse(None) is StudyType.OTHER


def test_profile_round_trip():
    p = DiseaseProfile("MONDO:1", "X", synonyms=("y",), tier=Tier.LIGHT)
    assert DiseaseProfile.from_dict(p.to_dict()) == p


def test_pipeline_config_validation():
    cfg = PipelineConfig.from_mapping({"seeds": {"benchmark": 7}})
    assert cfg.seed("benchmark") == 7 and cfg.seed("bootstrap") == 42
    with pytest.raises(DomainError):
        PipelineConfig(consensus_threshold=1)
    with pytest.raises(DomainError):
        PipelineConfig.from_mapping({"credibility_weights": {"journal_tier": 0.5}})
    with pytest.raises(DomainError):
        PipelineConfig.from_mapping({"bogus": 1})
