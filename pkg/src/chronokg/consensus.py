"""Multi-model consensus: entity normalisation, indel similarity, union-find clustering.

Triples are only compared within one source document. Cross-document
support is folded in afterwards by :func:`merge_cross_document`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from chronokg.extraction import RawTriple
from chronokg.model import TemporalTriple

QUARANTINE = "__quarantine__"

RELATIONS = (
    "disease_phenotype_positive",
    "disease_protein",
    "indication",
    "contraindication",
    "off_label_use",
    "disease_disease",
    "phenotype_protein",
    "drug_effect",
    "anatomy_involvement",
    "exposure_disease",
)

RELATION_ALIASES: dict[str, str] = {
    "has phenotype": "disease_phenotype_positive",
    "has_phenotype": "disease_phenotype_positive",
    "phenotype": "disease_phenotype_positive",
    "presents with": "disease_phenotype_positive",
    "manifests as": "disease_phenotype_positive",
    "symptom": "disease_phenotype_positive",
    "has symptom": "disease_phenotype_positive",
    "associated gene": "disease_protein",
    "gene association": "disease_protein",
    "caused by": "disease_protein",
    "disease_gene": "disease_protein",
    "treated by": "indication",
    "treats": "indication",
    "treatment": "indication",
    "contraindicated": "contraindication",
    "off label": "off_label_use",
    "off-label use": "off_label_use",
    "comorbidity": "disease_disease",
    "associated disease": "disease_disease",
    "differential": "disease_disease",
    "side effect": "drug_effect",
    "adverse effect": "drug_effect",
    "affects": "anatomy_involvement",
    "involves": "anatomy_involvement",
    "risk factor": "exposure_disease",
    "exposure": "exposure_disease",
}

CONFIDENCE_RANK = {"high": 2, "medium": 1, "low": 0}

_PAREN_RE = re.compile(r"\([^()]*\)|\[[^\[\]]*\]")
_SPACE_RE = re.compile(r"\s+")


class NormalizedEntity(NamedTuple):
    key: str
    variants: tuple[str, ...]


def normalize_entity(name: str) -> NormalizedEntity:
    """Lowercase, drop parentheticals, split ``a/b`` into key ``a`` plus variants."""
    text = (name or "").lower()
    prev = None
    while prev != text:  # nested parentheses peel one layer per pass
        prev, text = text, _PAREN_RE.sub(" ", text)
    parts = [_SPACE_RE.sub(" ", p).strip(" \t\n,;:.") for p in text.split("/")]
    parts = [p for p in parts if p]
    if not parts:
        return NormalizedEntity("", ())
    return NormalizedEntity(parts[0], tuple(parts[1:]))


def normalize(name: str) -> str:
    return normalize_entity(name).key


def relation_canonical(relation: str) -> str:
    key = _SPACE_RE.sub(" ", (relation or "").strip().lower())
    if not key:
        return QUARANTINE
    if key in RELATIONS:
        return key
    if key.replace(" ", "_") in RELATIONS:
        return key.replace(" ", "_")
    return RELATION_ALIASES.get(key, RELATION_ALIASES.get(key.replace("_", " "), QUARANTINE))


def _lcs_length(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if ca == cb else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def indel_distance(a: str, b: str) -> int:
    """Minimum insertions plus deletions turning ``a`` into ``b``."""
    return len(a) + len(b) - 2 * _lcs_length(a, b)


def similarity_ratio(a: str, b: str) -> int:
    """Indel similarity as an integer percentage, rounded half-up."""
    total = len(a) + len(b)
    if total == 0:
        return 100
    matched = total - indel_distance(a, b)
    # floor(100 * matched / total + 1/2) in exact integer arithmetic
    return (200 * matched + total) // (2 * total)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return sorted(out.values(), key=lambda g: g[0])


@dataclass(frozen=True)
class ConsensusTriple:
    triple: RawTriple
    relation: str
    consensus_confidence: float
    agreeing_models: tuple[str, ...]
    cluster_members: int
    total_models: int

    def __getattr__(self, name: str) -> Any:
        # expose the representative's fields (subject, object, pmid, ...)
        if name != "triple":
            return getattr(self.triple, name)
        raise AttributeError(name)

    def to_dict(self) -> dict[str, Any]:
        d = self.triple.to_dict()
        d.update(
            canonical_relation=self.relation,
            consensus_confidence=self.consensus_confidence,
            agreeing_models=list(self.agreeing_models),
            cluster_members=self.cluster_members,
            total_models=self.total_models,
        )
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ConsensusTriple":
        raw_keys = {f.name for f in fields(RawTriple)}
        return cls(
            triple=RawTriple.from_dict({k: v for k, v in data.items() if k in raw_keys}),
            relation=data["canonical_relation"],
            consensus_confidence=data["consensus_confidence"],
            agreeing_models=tuple(data["agreeing_models"]),
            cluster_members=data["cluster_members"],
            total_models=data["total_models"],
        )


def _tie_key(t: RawTriple) -> tuple:
    return (
        -CONFIDENCE_RANK.get(t.confidence, 0),
        t.model,
        t.subject,
        t.object,
        t.relation,
        t.evidence_text,
        repr(t.temporal_context),
        repr(sorted((t.conditions or {}).items())),
    )


def compute_consensus(
    per_model_triples: Mapping[str, Sequence[RawTriple]],
    threshold: int = 2,
    fuzzy_threshold: int = 80,
    total_models: int | None = None,
) -> list[ConsensusTriple]:
    """Cluster one document's triples across models and keep multi-model clusters.

    ``total_models`` defaults to the number of keys in ``per_model_triples``,
    so a model that processed the document but found nothing still counts in
    the denominator.
    """
    if threshold < 2:
        raise ValueError("threshold must be >= 2")
    n_models = total_models if total_models is not None else len(per_model_triples)

    candidates: list[RawTriple] = []
    for model in sorted(per_model_triples):
        for t in per_model_triples[model]:
            candidates.append(t if t.model == model else _with_model(t, model))
    # canonical order makes the output independent of input order
    candidates.sort(key=_tie_key)
    subj = [normalize(t.subject) for t in candidates]
    obj = [normalize(t.object) for t in candidates]
    rel = [relation_canonical(t.relation) for t in candidates]

    uf = UnionFind(len(candidates))
    for i in range(len(candidates)):
        if rel[i] == QUARANTINE:
            continue
        for j in range(i + 1, len(candidates)):
            if (
                rel[i] == rel[j]
                and candidates[i].model != candidates[j].model
                and similarity_ratio(subj[i], subj[j]) >= fuzzy_threshold
                and similarity_ratio(obj[i], obj[j]) >= fuzzy_threshold
            ):
                uf.union(i, j)

    out = []
    for group in uf.groups():
        models = sorted({candidates[i].model for i in group})
        if len(models) < threshold:
            continue
        rep_idx = min(group, key=lambda i: _tie_key(candidates[i]))
        out.append(
            ConsensusTriple(
                triple=candidates[rep_idx],
                relation=rel[rep_idx],
                consensus_confidence=len(models) / n_models,
                agreeing_models=tuple(models),
                cluster_members=len(group),
                total_models=n_models,
            )
        )
    out.sort(key=lambda c: (normalize(c.subject), c.relation, normalize(c.object), c.model))
    return out


def _with_model(t: RawTriple, model: str) -> RawTriple:
    return replace(t, model=model)


def _onsets_compatible(a: TemporalTriple, b: TemporalTriple) -> bool:
    ra, rb = a.temporal.onset, b.temporal.onset
    if ra is None and rb is None:
        return True
    if ra is None or rb is None:
        return False
    return ra[0] <= rb[1] and rb[0] <= ra[1]


def merge_cross_document(triples: Iterable[TemporalTriple]) -> list[TemporalTriple]:
    """Fold records of the same edge from different documents into one.

    Records merge when their normalised (subject, relation, object) match and
    their onset ranges overlap (or both lack one). The earliest record in
    input order is kept and the others' PMIDs are appended to it.
    """
    merged: list[TemporalTriple] = []
    index: dict[tuple[str, str, str], list[int]] = {}
    for t in triples:
        key = (normalize(t.source_name), t.relation, normalize(t.target_name))
        target = None
        for pos in index.get(key, []):
            if _onsets_compatible(merged[pos], t):
                target = pos
                break
        if target is None:
            index.setdefault(key, []).append(len(merged))
            merged.append(t)
            continue
        base = merged[target]
        ids = list(base.evidence.source_ids)
        ids.extend(s for s in t.evidence.source_ids if s not in ids)
        merged[target] = replace(base, evidence=replace(base.evidence, source_ids=tuple(ids)))
    return merged
