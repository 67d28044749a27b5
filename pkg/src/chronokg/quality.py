"""Quality control: per-triple validation, schema alignment, credibility scoring."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from chronokg.acquisition import SourceDocument
from chronokg.consensus import QUARANTINE, ConsensusTriple, normalize
from chronokg.model import (
    DEFAULT_CREDIBILITY_WEIGHTS,
    DEFAULT_STUDY_TYPE_WEIGHTS,
    EvidenceBlock,
    DiseaseProfile,
    PipelineConfig,
    QualityGrade,
    StudyType,
    TemporalContext,
    TemporalTriple,
    edge_hash,
)

JOURNAL_TIER_LEVELS = {1: 1.0, 2: 0.75, 3: 0.5, 4: 0.25}

TYPE_ALIASES = {
    "disease": "disease",
    "phenotype": "effect/phenotype",
    "effect/phenotype": "effect/phenotype",
    "symptom": "effect/phenotype",
    "sign": "effect/phenotype",
    "gene": "gene/protein",
    "protein": "gene/protein",
    "gene/protein": "gene/protein",
    "drug": "drug",
    "anatomy": "anatomy",
    "exposure": "exposure",
    "pathway": "pathway",
}


@dataclass(frozen=True)
class CredibilitySignals:
    journal_tier: float | None = None
    citation_velocity: float | None = None
    study_type_weight: float | None = None
    replication_signal: float | None = None
    retraction_check: float | None = None
    llm_consensus: float | None = None

    def __post_init__(self) -> None:
        for name in DEFAULT_CREDIBILITY_WEIGHTS:
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"signal {name}={v} outside [0, 1]")


def study_type_weight(study_type: str, table: Mapping[str, float] = DEFAULT_STUDY_TYPE_WEIGHTS) -> float:
    return table.get(StudyType.parse(study_type).value, table[StudyType.OTHER.value])


def credibility_score(
    signals: CredibilitySignals, weights: Mapping[str, float] = DEFAULT_CREDIBILITY_WEIGHTS
) -> float:
    """Weighted sum of the six signals; a missing signal contributes nothing.

    Rounded to 6 decimals, which keeps hand-checkable values such as 0.275
    exact and is monotone, so it cannot break ordering between scores.
    """
    total = sum(weights[name] * (getattr(signals, name) or 0.0) for name in weights)
    return round(min(1.0, max(0.0, total)), 6)


def citation_velocity(citation_count: int | None, publication_year: int | None, reference_year: int,
                      saturation: float = 10.0) -> float | None:
    """Citations per year since publication, scaled so ``saturation``/year maps to 1."""
    if citation_count is None or publication_year is None:
        return None
    years = max(1, reference_year - publication_year)
    return min(1.0, citation_count / years / saturation)


class JournalTiers:
    """Journal name to tier level (1-4) lookup, loaded from a two-column TSV."""

    def __init__(self, levels: Mapping[str, int] | None = None):
        self.levels = {k.strip().lower(): int(v) for k, v in (levels or {}).items()}

    @classmethod
    def load(cls, path: str | Path) -> "JournalTiers":
        levels = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh, delimiter="\t"):
                if not row or row[0].startswith("#") or row[0] == "journal":
                    continue
                levels[row[0]] = int(row[1])
        return cls(levels)

    def score(self, journal: str | None) -> float | None:
        if not journal:
            return None
        level = self.levels.get(journal.strip().lower())
        return JOURNAL_TIER_LEVELS.get(level) if level is not None else None


def signals_for(
    triple: ConsensusTriple,
    doc: SourceDocument | None,
    config: PipelineConfig,
    journal_tiers: JournalTiers | None = None,
    reference_year: int = 2026,
) -> CredibilitySignals:
    study = doc.study_type if doc is not None else StudyType.OTHER.value
    jt = None
    if doc is not None:
        jt = doc.journal_tier if doc.journal_tier is not None else (
            journal_tiers.score(doc.journal) if journal_tiers else None
        )
    return CredibilitySignals(
        journal_tier=jt,
        citation_velocity=citation_velocity(doc.citation_count, doc.publication_year, reference_year)
        if doc is not None else None,
        study_type_weight=study_type_weight(study, config.study_type_weights),
        replication_signal=doc.replication_signal if doc is not None else None,
        retraction_check=(0.0 if doc.is_retracted else 1.0) if doc is not None and doc.is_retracted is not None
        else None,
        llm_consensus=triple.consensus_confidence,
    )


# ---------------------------------------------------------------------------
# Schema index
# ---------------------------------------------------------------------------


@dataclass
class SchemaIndex:
    """Known reference-KG edges plus a name-to-id lookup for entities."""

    edges: set[tuple[str, str, str]] = field(default_factory=set)
    entity_types: dict[str, str] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)
    labels: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def normalize_id(entity_id: str) -> str:
        return str(entity_id).strip().upper()

    @classmethod
    def load(cls, path: str | Path) -> "SchemaIndex":
        """Read a TSV of ``head_id head_type relation tail_id tail_type [head_name tail_name]``."""
        index = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh, delimiter="\t"):
                if not row or row[0].startswith("#") or row[0] == "head_id":
                    continue
                head, htype, rel, tail, ttype = row[:5]
                index.add(head, htype, rel, tail, ttype,
                          row[5] if len(row) > 5 else None, row[6] if len(row) > 6 else None)
        return index

    def add(self, head: str, htype: str, rel: str, tail: str, ttype: str,
            head_name: str | None = None, tail_name: str | None = None) -> None:
        h, t = self.normalize_id(head), self.normalize_id(tail)
        self.edges.add((h, rel, t))
        self.entity_types[h] = htype
        self.entity_types[t] = ttype
        for eid, name in ((h, head_name), (t, tail_name)):
            if name:
                self.names.setdefault(normalize(name), eid)
                self.labels.setdefault(eid, name)

    @property
    def type_vocabulary(self) -> set[str]:
        return set(self.entity_types.values())

    def resolve(self, name: str) -> str | None:
        return self.names.get(normalize(name))

    def has_edge(self, head: str, relation: str, tail: str) -> bool:
        return (self.normalize_id(head), relation, self.normalize_id(tail)) in self.edges

    def edges_for(self, head_name: str, relation: str) -> list[tuple[str, str]]:
        """(tail id, tail label) pairs for a head entity given by name."""
        head = self.resolve(head_name)
        if head is None:
            return []
        out = [(t, self.labels.get(t, t)) for h, r, t in self.edges if h == head and r == relation]
        return sorted(out)


# ---------------------------------------------------------------------------
# Agent operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationResult:
    passed: bool
    reasons: tuple[str, ...] = ()


def validate_triple(triple: ConsensusTriple, config: PipelineConfig) -> ValidationResult:
    reasons: list[str] = []
    subj, obj = normalize(triple.subject), normalize(triple.object)
    if not subj or not obj:
        reasons.append("empty-entity")
    if subj and subj == obj:
        reasons.append("self-reference")
    if triple.relation == QUARANTINE:
        reasons.append("unknown-relation")
    if not triple.pmid:
        reasons.append("no-provenance")
    ctx = triple.temporal_context
    if ctx is not None:
        lo_bound, hi_bound = config.age_bounds
        ages = [a for a in (ctx.onset_age_min, ctx.onset_age_max) if a is not None]
        if any(a < lo_bound or a > hi_bound for a in ages):
            reasons.append("age-bounds")
        if ctx.onset_age_min is not None and ctx.onset_age_max is not None and ctx.onset_age_min > ctx.onset_age_max:
            reasons.append("min-exceeds-max")
        for problem in ctx.problems():
            if problem not in reasons and problem != "age-bounds":
                reasons.append(problem)
    return ValidationResult(not reasons, tuple(reasons))


@dataclass(frozen=True)
class Alignment:
    grade: QualityGrade
    source_id: str
    source_type: str
    target_id: str
    target_type: str


def normalize_type(label: str, vocabulary: Iterable[str] = ()) -> str:
    key = (label or "").strip().lower()
    mapped = TYPE_ALIASES.get(key, key)
    vocab = set(vocabulary)
    if vocab and mapped not in vocab and key in vocab:
        return key
    return mapped or "unknown"


def novel_entity_id(name: str) -> str:
    return "novel:" + hashlib.sha256(normalize(name).encode("utf-8")).hexdigest()[:10]


def align_schema(
    triple: ConsensusTriple, schema_index: SchemaIndex, profile: DiseaseProfile | None = None
) -> Alignment:
    def entity_id(name: str) -> str:
        found = schema_index.resolve(name)
        if found is not None:
            return found
        if profile is not None and normalize(name) in {normalize(n) for n in (profile.name, *profile.synonyms)}:
            return SchemaIndex.normalize_id(profile.disease_id.split(":", 1)[-1])
        return novel_entity_id(name)

    sid, tid = entity_id(triple.subject), entity_id(triple.object)
    known = schema_index.has_edge(sid, triple.relation, tid)
    vocab = schema_index.type_vocabulary
    return Alignment(
        grade=QualityGrade.A if known else QualityGrade.B,
        source_id=sid,
        source_type=schema_index.entity_types.get(sid) or normalize_type(triple.subject_type, vocab),
        target_id=tid,
        target_type=schema_index.entity_types.get(tid) or normalize_type(triple.object_type, vocab),
    )


@dataclass(frozen=True)
class Rejection:
    pmid: str
    subject: str
    relation: str
    object: str
    reasons: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"pmid": self.pmid, "subject": self.subject, "relation": self.relation,
                "object": self.object, "reasons": list(self.reasons)}


@dataclass(frozen=True)
class Conflict:
    edge_ids: tuple[str, str]
    subject: str
    relation: str
    object: str
    ranges: tuple[tuple[float, float], tuple[float, float]]
    gap: float

    def to_dict(self) -> dict[str, Any]:
        return {"edge_ids": list(self.edge_ids), "subject": self.subject, "relation": self.relation,
                "object": self.object, "ranges": [list(r) for r in self.ranges], "gap": self.gap}


@dataclass
class QCResult:
    validated: list[TemporalTriple]
    rejected: list[Rejection]
    conflicts: list[Conflict]

    def report(self) -> dict[str, Any]:
        return {
            "validated": len(self.validated),
            "rejected": [r.to_dict() for r in self.rejected],
            "conflicts": [c.to_dict() for c in self.conflicts],
        }


def range_gap(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Distance between two closed intervals; 0 when they touch or overlap."""
    return max(0.0, max(a[0], b[0]) - min(a[1], b[1]))


def detect_conflicts(triples: Sequence[TemporalTriple], gap_years: float = 10.0) -> list[Conflict]:
    groups: dict[tuple[str, str, str], list[TemporalTriple]] = {}
    for t in triples:
        if t.temporal.has_onset:
            groups.setdefault((normalize(t.source_name), t.relation, normalize(t.target_name)), []).append(t)
    out = []
    for (s, r, o), members in groups.items():
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                gap = range_gap(a.temporal.onset, b.temporal.onset)  # type: ignore[arg-type]
                if gap > gap_years:
                    out.append(Conflict((a.edge_id, b.edge_id), s, r, o,
                                        (a.temporal.onset, b.temporal.onset), gap))  # type: ignore[arg-type]
    return out


def qc_pipeline(
    triples: Sequence[ConsensusTriple],
    config: PipelineConfig,
    schema_index: SchemaIndex,
    *,
    documents: Mapping[str, SourceDocument] | None = None,
    profile: DiseaseProfile | None = None,
    journal_tiers: JournalTiers | None = None,
    reference_year: int = 2026,
) -> QCResult:
    """Validate, align, score, and assemble full records for a batch of consensus triples."""
    documents = documents or {}
    date = config.extraction_date or _dt.date.today().isoformat()
    validated: list[TemporalTriple] = []
    rejected: list[Rejection] = []
    for ct in triples:
        check = validate_triple(ct, config)
        if not check.passed:
            rejected.append(Rejection(ct.pmid, ct.subject, ct.relation, ct.object, check.reasons))
            continue
        aligned = align_schema(ct, schema_index, profile)
        doc = documents.get(ct.pmid)
        signals = signals_for(ct, doc, config, journal_tiers, reference_year)
        pmid = f"PMID:{ct.pmid}"
        evidence = EvidenceBlock(
            tier=2,
            source_ids=(pmid,),
            evidence_text=ct.evidence_text[: config.evidence_text_cap],
            study_type=doc.study_type if doc is not None else StudyType.OTHER.value,
            credibility_score=credibility_score(signals, config.credibility_weights),
            consensus_confidence=round(ct.consensus_confidence, 4),
            extraction_models=(ct.model,),
            extraction_method="tier2_llm_consensus",
            citation_count=doc.citation_count if doc is not None else None,
            is_retracted=bool(doc.is_retracted) if doc is not None else False,
            publication_year=ct.publication_year,
        )
        validated.append(
            TemporalTriple(
                edge_id=edge_hash(aligned.source_id, ct.relation, aligned.target_id, pmid),
                source_id=aligned.source_id,
                source_type=aligned.source_type,
                source_name=ct.subject,
                relation=ct.relation,
                target_id=aligned.target_id,
                target_type=aligned.target_type,
                target_name=ct.object,
                temporal=ct.temporal_context or TemporalContext(),
                evidence=evidence,
                conditions=ct.conditions,
                extraction_date=date,
                disease_profile_id=profile.disease_id if profile is not None else "",
                quality_grade=aligned.grade,
            )
        )
    return QCResult(validated, rejected, detect_conflicts(validated, config.conflict_gap_years))
