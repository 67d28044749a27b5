"""End-to-end construction for one disease: profile, harvest, extract, consensus, QC, store."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from chronokg.acquisition import DocumentSource, HarvestResult, OntologySource, harvest, profile_disease
from chronokg.consensus import ConsensusTriple, compute_consensus, merge_cross_document
from chronokg.errors import DomainError
from chronokg.extraction import ExtractionResult, ModelProvider, RawTriple, extract_document
from chronokg.model import DiseaseProfile, PipelineConfig, TemporalTriple
from chronokg.quality import JournalTiers, QCResult, SchemaIndex, qc_pipeline
from chronokg.store import KGStore, TierName

logger = logging.getLogger(__name__)


@dataclass
class PipelineInputs:
    ontology: OntologySource
    documents: DocumentSource
    providers: Sequence[ModelProvider]
    schema: SchemaIndex
    config: PipelineConfig
    tiebreaker: ModelProvider | None = None
    journal_tiers: JournalTiers | None = None
    cache_root: Path | None = None
    reference_year: int = 2026


@dataclass
class DiseaseRun:
    profile: DiseaseProfile
    harvest: HarvestResult
    extractions: list[ExtractionResult]
    consensus: list[ConsensusTriple]
    qc: QCResult
    merged: list[TemporalTriple]
    warnings: list[str] = field(default_factory=list)

    @property
    def raw(self) -> list[RawTriple]:
        return [t for er in self.extractions for t in er.all_triples()]

    def counts(self) -> dict[str, int]:
        return {
            "documents": len(self.harvest.documents),
            "raw": len(self.raw),
            "consensus": len(self.consensus),
            "validated": len(self.qc.validated),
            "rejected": len(self.qc.rejected),
            "merged": len(self.merged),
            "conflicts": len(self.qc.conflicts),
        }


def consensus_for(extractions: Sequence[ExtractionResult], config: PipelineConfig) -> list[ConsensusTriple]:
    """Per-document consensus; documents are visited in extraction order."""
    out: list[ConsensusTriple] = []
    for er in extractions:
        if not er.per_model:
            continue
        out.extend(compute_consensus(er.per_model, config.consensus_threshold, config.fuzzy_threshold,
                                     total_models=er.total_models))
    return out


def run_disease(disease_id: str, inputs: PipelineInputs) -> DiseaseRun:
    cfg = inputs.config
    profile = profile_disease(disease_id, inputs.ontology)
    harvested = harvest(profile, inputs.documents, cfg, inputs.cache_root, inputs.reference_year)
    warnings = list(harvested.warnings)
    logger.info("%s: %d documents (tier %s)", disease_id, len(harvested.documents), profile.tier.value)

    extractions = [
        extract_document(doc, profile, inputs.providers, cfg, inputs.tiebreaker) for doc in harvested.documents
    ]
    for er in extractions:
        if er.total_models < cfg.consensus_threshold:
            warnings.append(f"PMID:{er.pmid} processed by {er.total_models} model(s); no consensus possible")

    consensus = consensus_for(extractions, cfg)
    qc = qc_pipeline(
        consensus, cfg, inputs.schema,
        documents={d.pmid: d for d in harvested.documents},
        profile=profile,
        journal_tiers=inputs.journal_tiers,
        reference_year=inputs.reference_year,
    )
    if len(qc.validated) + len(qc.rejected) != len(consensus):
        raise DomainError("record conservation violated: validated + rejected != consensus input")
    merged = merge_cross_document(qc.validated)
    return DiseaseRun(profile, harvested, extractions, consensus, qc, merged, warnings)


def write_disease_run(run: DiseaseRun, store: KGStore) -> dict[str, Path]:
    """Replace the disease's three tier files and return their paths."""
    did = run.profile.disease_id
    return {
        TierName.RAW.value: store.write_disease(did, TierName.RAW, run.raw).path,
        TierName.CONSENSUS.value: store.write_disease(did, TierName.CONSENSUS, run.consensus).path,
        TierName.VALIDATED.value: store.write_disease(did, TierName.VALIDATED, run.merged).path,
    }


def run_report(run: DiseaseRun) -> dict[str, Any]:
    return {
        "disease_id": run.profile.disease_id,
        "name": run.profile.name,
        "tier": run.profile.tier.value,
        "counts": run.counts(),
        "extractions": [er.summary() for er in run.extractions],
        "qc": run.qc.report(),
        "warnings": run.warnings,
    }
