"""Domain types and the pure onset-bin / clinical-era helpers used by every stage.

Ages are always fractional years. Months and days are converted at ingest
(see :func:`months_to_years`).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Mapping

from chronokg.errors import DomainError

AGE_MIN = 0.0
AGE_MAX = 120.0
EVIDENCE_TEXT_CAP = 300
PIPELINE_VERSION = "1.0.0"


class StudyType(str, Enum):
    META_ANALYSIS = "meta-analysis"
    GUIDELINE = "guideline"
    RCT = "rct"
    DATABASE = "database"
    COHORT = "cohort"
    CASE_CONTROL = "case-control"
    REVIEW = "review"
    CASE_SERIES = "case-series"
    CASE_REPORT = "case-report"
    EXPERT_OPINION = "expert-opinion"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str | None) -> "StudyType":
        """Lenient lookup; anything unrecognised becomes ``OTHER``."""
        if value is None:
            return cls.OTHER
        key = str(value).strip().lower().replace("_", "-").replace(" ", "-")
        aliases = {
            "randomized-controlled-trial": cls.RCT,
            "randomised-controlled-trial": cls.RCT,
            "meta-analyses": cls.META_ANALYSIS,
            "metaanalysis": cls.META_ANALYSIS,
            "practice-guideline": cls.GUIDELINE,
            "systematic-review": cls.REVIEW,
            "case-reports": cls.CASE_REPORT,
        }
        if key in aliases:
            return aliases[key]
        for member in cls:
            if member.value == key:
                return member
        return cls.OTHER


class Tier(str, Enum):
    STANDARD = "Standard"
    LIGHT = "Light"
    MINIMAL = "Minimal"


class QualityGrade(str, Enum):
    A = "A"
    B = "B"


def months_to_years(months: float) -> float:
    return months / 12.0


def days_to_years(days: float) -> float:
    return days / 365.25


# ---------------------------------------------------------------------------
# Onset bins and clinical eras
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgeBin:
    name: str
    lo: float
    hi: float


@dataclass(frozen=True)
class OnsetBinTable:
    """Fine onset bins, their 5-way coarse collapse, and the clinical-era lookup.

    Fine bins are half-open ``[lo, hi)`` except the last, which is closed so
    the table covers ``[0, 120]``. Eras are closed intervals and overlap.
    """

    fine_bins: tuple[AgeBin, ...]
    coarse_map: Mapping[str, str]
    coarse_bins: tuple[str, ...]
    clinical_eras: tuple[AgeBin, ...]

    def __post_init__(self) -> None:
        bins = self.fine_bins
        if not bins or bins[0].lo != AGE_MIN or bins[-1].hi != AGE_MAX:
            raise DomainError("fine bins must cover [0, 120]")
        for a, b in zip(bins, bins[1:]):
            if a.hi != b.lo:
                raise DomainError(f"fine bins {a.name} and {b.name} are not contiguous")
        for b in bins:
            if self.coarse_map.get(b.name) not in self.coarse_bins:
                raise DomainError(f"fine bin {b.name} has no coarse bin")

    @property
    def fine_names(self) -> list[str]:
        return [b.name for b in self.fine_bins]

    @property
    def era_names(self) -> list[str]:
        return [e.name for e in self.clinical_eras]

    def era(self, name: str) -> AgeBin:
        for e in self.clinical_eras:
            if e.name == name:
                return e
        raise DomainError(f"unknown clinical era: {name!r}")

    def era_index(self, name: str) -> int:
        return self.era_names.index(self.era(name).name)


DEFAULT_BIN_TABLE = OnsetBinTable(
    fine_bins=(
        AgeBin("neonatal", 0.0, 0.08),
        AgeBin("infantile", 0.08, 1.0),
        AgeBin("early_childhood", 1.0, 5.0),
        AgeBin("childhood", 5.0, 10.0),
        AgeBin("juvenile", 10.0, 16.0),
        AgeBin("young_adult", 16.0, 40.0),
        AgeBin("adult", 40.0, 60.0),
        AgeBin("late_onset", 60.0, 120.0),
    ),
    coarse_map={
        "neonatal": "antenatal-infantile",
        "infantile": "antenatal-infantile",
        "early_childhood": "childhood",
        "childhood": "childhood",
        "juvenile": "juvenile",
        "young_adult": "adult",
        "adult": "adult",
        "late_onset": "late-onset",
    },
    coarse_bins=("antenatal-infantile", "childhood", "juvenile", "adult", "late-onset"),
    clinical_eras=(
        AgeBin("prenatal", 0.0, 0.0),
        AgeBin("infancy", 0.0, 1.0),
        AgeBin("early_childhood", 1.0, 5.0),
        AgeBin("childhood", 1.0, 11.0),
        AgeBin("adolescence", 10.0, 18.0),
        AgeBin("adulthood", 18.0, 65.0),
        AgeBin("older_adulthood", 65.0, AGE_MAX),
    ),
)


def check_age_range(min_y: float, max_y: float) -> None:
    if not (AGE_MIN <= min_y <= max_y <= AGE_MAX):
        raise DomainError(f"invalid age range ({min_y}, {max_y}); need 0 <= min <= max <= 120")


def era_of_range(min_y: float, max_y: float, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    """Era with the largest overlap with ``[min_y, max_y]``; earlier era wins ties.

    Overlap length is compared first; among zero-length overlaps an era that
    touches the range beats one that does not, so point ranges resolve to an
    era containing the point.
    """
    check_age_range(min_y, max_y)
    best_name, best_key = None, None
    for era in table.clinical_eras:
        lo, hi = max(min_y, era.lo), min(max_y, era.hi)
        key = (max(0.0, hi - lo), lo <= hi)
        if best_key is None or key > best_key:
            best_name, best_key = era.name, key
    assert best_name is not None
    return best_name


def age_to_fine_bin(age: float, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    if not AGE_MIN <= age <= AGE_MAX:
        raise DomainError(f"age {age} outside [0, 120]")
    for b in table.fine_bins:
        if b.lo <= age < b.hi:
            return b.name
    return table.fine_bins[-1].name


def range_to_fine_bin(min_y: float, max_y: float, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    """Fine bin holding the midpoint of the range."""
    check_age_range(min_y, max_y)
    return age_to_fine_bin((min_y + max_y) / 2.0, table)


def collapse_bin(fine_bin: str, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    try:
        return table.coarse_map[fine_bin]
    except KeyError:
        raise DomainError(f"unknown fine bin: {fine_bin!r}") from None


def edge_hash(source_id: str, relation: str, target_id: str, pmid: str) -> str:
    canonical = "\t".join((source_id, relation, target_id, pmid))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Record types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemporalContext:
    onset_age_min: float | None = None
    onset_age_max: float | None = None
    progression_stage: str | None = None
    milestone: str | None = None
    temporal_qualifier: str | None = None
    discovery_date: str | None = None
    validity_start: str | None = None
    validity_end: str | None = None
    superseded_by: str | None = None
    temporal_resolution: str = "unknown"
    duration: float | None = None
    treatment_start_age: float | None = None

    @property
    def has_onset(self) -> bool:
        return self.onset_age_min is not None and self.onset_age_max is not None

    @property
    def onset(self) -> tuple[float, float] | None:
        if not self.has_onset:
            return None
        return (self.onset_age_min, self.onset_age_max)  # type: ignore[return-value]

    @property
    def is_temporal(self) -> bool:
        return bool(
            self.has_onset or self.progression_stage or self.milestone or self.temporal_qualifier
        )

    def problems(self) -> list[str]:
        """Names of violated invariants (empty when the context is valid)."""
        out: list[str] = []
        lo, hi = self.onset_age_min, self.onset_age_max
        ages = [a for a in (lo, hi, self.treatment_start_age) if a is not None]
        if any(a < AGE_MIN or a > AGE_MAX for a in ages):
            out.append("age-bounds")
        if lo is not None and hi is not None and lo > hi:
            out.append("min-exceeds-max")
        if self.temporal_resolution not in ("year", "month", "day", "unknown"):
            out.append("temporal-resolution")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "TemporalContext":
        if not data:
            return cls()
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known and v is not None}
        for key in ("onset_age_min", "onset_age_max", "duration", "treatment_start_age"):
            if key in kwargs:
                kwargs[key] = _as_age(kwargs[key])
        return cls(**kwargs)


def _as_age(value: Any) -> float | int | None:
    # keep integral ages as ints so records round-trip byte-for-byte
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    try:
        f = float(value)
    except (TypeError, ValueError):
        return None
    return int(f) if f.is_integer() and not isinstance(value, float) else f


@dataclass(frozen=True)
class EvidenceBlock:
    tier: int
    source_ids: tuple[str, ...]
    evidence_text: str
    study_type: str
    credibility_score: float
    consensus_confidence: float
    extraction_models: tuple[str, ...]
    extraction_method: str = "tier2_llm_consensus"
    citation_count: int | None = None
    is_retracted: bool = False
    publication_year: int | None = None

    def problems(self) -> list[str]:
        out = []
        if not self.source_ids:
            out.append("no-provenance")
        if len(self.evidence_text) > EVIDENCE_TEXT_CAP:
            out.append("evidence-too-long")
        if not 0.0 <= self.credibility_score <= 1.0:
            out.append("credibility-range")
        if not 0.0 < self.consensus_confidence <= 1.0:
            out.append("consensus-range")
        return out

    def to_dict(self) -> dict[str, Any]:
        d = {
            "tier": self.tier,
            "source_ids": list(self.source_ids),
            "evidence_text": self.evidence_text,
            "study_type": self.study_type,
            "credibility_score": self.credibility_score,
            "consensus_confidence": self.consensus_confidence,
            "extraction_models": list(self.extraction_models),
            "extraction_method": self.extraction_method,
            "citation_count": self.citation_count,
            "is_retracted": self.is_retracted,
        }
        # not in the released v1.0 record; only written when known
        if self.publication_year is not None:
            d["publication_year"] = self.publication_year
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvidenceBlock":
        return cls(
            tier=int(data.get("tier", 2)),
            source_ids=tuple(str(s) for s in data.get("source_ids") or ()),
            evidence_text=data.get("evidence_text") or "",
            study_type=data.get("study_type") or StudyType.OTHER.value,
            credibility_score=data.get("credibility_score", 0.0),
            consensus_confidence=data.get("consensus_confidence", 1.0),
            extraction_models=tuple(data.get("extraction_models") or ()),
            extraction_method=data.get("extraction_method") or "tier2_llm_consensus",
            citation_count=data.get("citation_count"),
            is_retracted=bool(data.get("is_retracted", False)),
            publication_year=data.get("publication_year"),
        )


@dataclass(frozen=True)
class TemporalTriple:
    """One validated KG edge with temporal context and evidence provenance."""

    edge_id: str
    source_id: str
    source_type: str
    source_name: str
    relation: str
    target_id: str
    target_type: str
    target_name: str
    temporal: TemporalContext
    evidence: EvidenceBlock
    conditions: Mapping[str, Any] | None = None
    extraction_date: str = ""
    pipeline_version: str = PIPELINE_VERSION
    disease_profile_id: str = ""
    quality_grade: QualityGrade = QualityGrade.B

    @property
    def pmids(self) -> tuple[str, ...]:
        return self.evidence.source_ids

    @property
    def primary_pmid(self) -> str:
        return self.evidence.source_ids[0] if self.evidence.source_ids else ""

    def to_dict(self) -> dict[str, Any]:
        # key order follows the released record layout
        return {
            "edge_id": self.edge_id,
            "source_id": self.source_id,
            "source_type": self.source_type,
            "source_name": self.source_name,
            "relation": self.relation,
            "target_id": self.target_id,
            "target_type": self.target_type,
            "target_name": self.target_name,
            "temporal": self.temporal.to_dict(),
            "evidence": self.evidence.to_dict(),
            "conditions": dict(self.conditions) if self.conditions is not None else None,
            "extraction_date": self.extraction_date,
            "pipeline_version": self.pipeline_version,
            "disease_profile_id": self.disease_profile_id,
            "quality_grade": QualityGrade(self.quality_grade).value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TemporalTriple":
        return cls(
            edge_id=data["edge_id"],
            source_id=str(data["source_id"]),
            source_type=data.get("source_type", ""),
            source_name=data.get("source_name", ""),
            relation=data["relation"],
            target_id=str(data["target_id"]),
            target_type=data.get("target_type", ""),
            target_name=data.get("target_name", ""),
            temporal=_temporal_from_record(data.get("temporal")),
            evidence=EvidenceBlock.from_dict(data.get("evidence") or {}),
            conditions=data.get("conditions"),
            extraction_date=data.get("extraction_date", ""),
            pipeline_version=data.get("pipeline_version", PIPELINE_VERSION),
            disease_profile_id=data.get("disease_profile_id", ""),
            quality_grade=QualityGrade(data.get("quality_grade", "B")),
        )

    def with_(self, **changes: Any) -> "TemporalTriple":
        return replace(self, **changes)


def _temporal_from_record(data: Mapping[str, Any] | None) -> TemporalContext:
    # records keep explicit nulls, so values are taken as-is
    if not data:
        return TemporalContext()
    known = {f.name for f in fields(TemporalContext)}
    kwargs = {k: v for k, v in data.items() if k in known}
    if kwargs.get("temporal_resolution") is None:
        kwargs["temporal_resolution"] = "unknown"
    return TemporalContext(**kwargs)


@dataclass(frozen=True)
class DiseaseProfile:
    disease_id: str
    name: str
    synonyms: tuple[str, ...] = ()
    differential_diseases: tuple[str, ...] = ()
    known_genes: tuple[str, ...] = ()
    known_phenotypes: tuple[str, ...] = ()
    category: str | None = None
    inheritance_pattern: str | None = None
    pubmed_count: int = 0
    pmc_fulltext_available: bool = False
    tier: Tier = Tier.MINIMAL

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        for key in ("synonyms", "differential_diseases", "known_genes", "known_phenotypes"):
            d[key] = list(d[key])
        d["tier"] = self.tier.value
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiseaseProfile":
        return cls(
            disease_id=data["disease_id"],
            name=data["name"],
            synonyms=tuple(data.get("synonyms") or ()),
            differential_diseases=tuple(data.get("differential_diseases") or ()),
            known_genes=tuple(data.get("known_genes") or ()),
            known_phenotypes=tuple(data.get("known_phenotypes") or ()),
            category=data.get("category"),
            inheritance_pattern=data.get("inheritance_pattern"),
            pubmed_count=int(data.get("pubmed_count", 0)),
            pmc_fulltext_available=bool(data.get("pmc_fulltext_available", False)),
            tier=Tier(data.get("tier", Tier.MINIMAL.value)),
        )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

DEFAULT_CREDIBILITY_WEIGHTS: dict[str, float] = {
    "journal_tier": 0.15,
    "citation_velocity": 0.15,
    "study_type_weight": 0.25,
    "replication_signal": 0.15,
    "retraction_check": 0.15,
    "llm_consensus": 0.15,
}

DEFAULT_STUDY_TYPE_WEIGHTS: dict[str, float] = {
    StudyType.META_ANALYSIS.value: 1.0,
    StudyType.GUIDELINE.value: 0.95,
    StudyType.RCT.value: 0.9,
    StudyType.DATABASE.value: 0.85,
    StudyType.COHORT.value: 0.7,
    StudyType.CASE_CONTROL.value: 0.6,
    StudyType.REVIEW.value: 0.5,
    StudyType.CASE_SERIES.value: 0.4,
    StudyType.CASE_REPORT.value: 0.3,
    StudyType.EXPERT_OPINION.value: 0.2,
    StudyType.OTHER.value: 0.1,
}

DEFAULT_SEEDS: dict[str, Any] = {
    "sample_novel": 42,
    "bootstrap": 42,
    "benchmark": 42,
    "cluster": 42,
    "linkpred": [42, 7, 123],
}


@dataclass(frozen=True)
class PipelineConfig:
    consensus_threshold: int = 2
    fuzzy_threshold: int = 80
    age_bounds: tuple[float, float] = (AGE_MIN, AGE_MAX)
    credibility_weights: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CREDIBILITY_WEIGHTS)
    )
    study_type_weights: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_STUDY_TYPE_WEIGHTS)
    )
    document_caps: Mapping[str, int | None] = field(
        default_factory=lambda: {"Standard": 150, "Light": None, "Minimal": None}
    )
    evidence_text_cap: int = EVIDENCE_TEXT_CAP
    seeds: Mapping[str, Any] = field(default_factory=lambda: dict(DEFAULT_SEEDS))
    temporal_floor: int = 1
    conflict_gap_years: float = 10.0
    provider_timeout: float = 120.0
    max_in_flight: int = 4
    extraction_date: str | None = None

    def __post_init__(self) -> None:
        if self.consensus_threshold < 2:
            raise DomainError("consensus_threshold must be >= 2")
        if not 0 <= self.fuzzy_threshold <= 100:
            raise DomainError("fuzzy_threshold must be a percentage")
        total = sum(self.credibility_weights.values())
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"credibility weights sum to {total}, expected 1.0")
        if set(self.credibility_weights) != set(DEFAULT_CREDIBILITY_WEIGHTS):
            raise DomainError("credibility weights must name exactly the six signals")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None) -> "PipelineConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        if "age_bounds" in data:
            data["age_bounds"] = tuple(data["age_bounds"])
        for key, default in (
            ("credibility_weights", DEFAULT_CREDIBILITY_WEIGHTS),
            ("study_type_weights", DEFAULT_STUDY_TYPE_WEIGHTS),
            ("seeds", DEFAULT_SEEDS),
        ):
            if key in data:
                data[key] = {**default, **data[key]}
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["age_bounds"] = list(self.age_bounds)
        for key in ("credibility_weights", "study_type_weights", "document_caps", "seeds"):
            d[key] = dict(d[key])
        return d

    def seed(self, name: str) -> Any:
        return self.seeds[name]
