"""Tiered JSONL persistence and the temporal query API.

Store layout under a root directory::

    raw_triples.jsonl.gz          flat merged tiers (authoritative)
    consensus_triples.jsonl.gz
    validated_triples.jsonl
    diseases/<PREFIX_ID>/{raw,consensus,validated}.jsonl[.gz]
"""

from __future__ import annotations

import gzip
import json
import logging
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

from chronokg.consensus import ConsensusTriple, normalize, similarity_ratio
from chronokg.errors import DomainError, NotFoundError
from chronokg.extraction import RawTriple
from chronokg.io import atomic_write_text
from chronokg.model import TemporalTriple

logger = logging.getLogger(__name__)


class TierName(str, Enum):
    RAW = "raw"
    CONSENSUS = "consensus"
    VALIDATED = "validated"


_RECORD_TYPES: dict[TierName, Any] = {
    TierName.RAW: RawTriple,
    TierName.CONSENSUS: ConsensusTriple,
    TierName.VALIDATED: TemporalTriple,
}

FLAT_NAMES = {
    TierName.RAW: "raw_triples.jsonl.gz",
    TierName.CONSENSUS: "consensus_triples.jsonl.gz",
    TierName.VALIDATED: "validated_triples.jsonl",
}


def encode_record(record: Any) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False)


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class TierFile:
    tier: TierName
    path: Path

    @property
    def compressed(self) -> bool:
        return self.path.suffix == ".gz"

    def count(self) -> int:
        if not self.path.exists():
            return 0
        with _open(self.path, "r") as fh:
            return sum(1 for line in fh if line.strip())


def append_records(path: str | Path, records: Iterable[Any], tier: TierName | str) -> int:
    """Append one JSON line per record; validated records are checked first."""
    tier = TierName(tier)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in records:
        if not isinstance(rec, _RECORD_TYPES[tier]):
            raise DomainError(f"{type(rec).__name__} cannot go into the {tier.value} tier")
        if tier is TierName.VALIDATED:
            problems = rec.temporal.problems() + rec.evidence.problems()
            if problems or not rec.source_name or not rec.target_name:
                raise DomainError(f"record {rec.edge_id} violates invariants: {problems}")
        lines.append(encode_record(rec) + "\n")
    if path.suffix == ".gz":
        with gzip.open(path, "at", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
    return len(lines)


def write_records(path: str | Path, records: Iterable[Any]) -> Path:
    """Replace ``path`` atomically with the given records (uncompressed tiers only)."""
    text = "".join(encode_record(r) + "\n" for r in records)
    return atomic_write_text(path, text)


@dataclass
class LoadResult:
    records: list[Any]
    errors: list[tuple[int, str]] = field(default_factory=list)


def load_tier(
    path: str | Path,
    tier: TierName | str,
    filter: Callable[[Any], bool] | None = None,
    *,
    on_error: str = "abort",
) -> LoadResult:
    """Read a tier file. ``on_error`` is ``"abort"`` (raise) or ``"skip"``."""
    tier = TierName(tier)
    path = Path(path)
    cls = _RECORD_TYPES[tier]
    out = LoadResult([])
    if not path.exists():
        return out
    with _open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = cls.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                msg = f"{path}:{lineno}: {exc}"
                if on_error == "abort":
                    raise DomainError(msg) from exc
                out.errors.append((lineno, str(exc)))
                logger.warning("skipping malformed line %s", msg)
                continue
            if filter is None or filter(rec):
                out.records.append(rec)
    return out


# ---------------------------------------------------------------------------
# Aggregation and queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhenotypeOnset:
    phenotype: str
    onset: tuple[float, float]
    pmids: tuple[str, ...]
    n_triples: int


@dataclass(frozen=True)
class OnsetAggregate:
    median_range: tuple[float, float] | None
    pooled_range: tuple[float, float] | None
    per_phenotype: tuple[PhenotypeOnset, ...] = ()

    @property
    def empty(self) -> bool:
        return self.median_range is None


def _median(values: Sequence[float]) -> float:
    return float(statistics.median(values))


def aggregate_onset(triples: Iterable[TemporalTriple], phenotype: str | None = None) -> OnsetAggregate:
    """Median and pooled onset ranges, overall and per normalised phenotype."""
    rows = [t for t in triples if t.temporal.has_onset]
    if phenotype is not None:
        key = normalize(phenotype)
        rows = [t for t in rows if normalize(t.target_name) == key]
    if not rows:
        return OnsetAggregate(None, None, ())
    mins = [float(t.temporal.onset_age_min) for t in rows]  # type: ignore[arg-type]
    maxs = [float(t.temporal.onset_age_max) for t in rows]  # type: ignore[arg-type]
    groups: dict[str, list[TemporalTriple]] = {}
    for t in rows:
        groups.setdefault(normalize(t.target_name), []).append(t)
    per = []
    for name, members in groups.items():
        pmids: list[str] = []
        for m in members:
            pmids.extend(p for p in m.evidence.source_ids if p not in pmids)
        per.append(
            PhenotypeOnset(
                phenotype=name,
                onset=(
                    _median([float(m.temporal.onset_age_min) for m in members]),  # type: ignore[arg-type]
                    _median([float(m.temporal.onset_age_max) for m in members]),  # type: ignore[arg-type]
                ),
                pmids=tuple(pmids),
                n_triples=len(members),
            )
        )
    per.sort(key=lambda p: (p.onset[0], p.phenotype))
    return OnsetAggregate((_median(mins), _median(maxs)), (min(mins), max(maxs)), tuple(per))


@dataclass(frozen=True)
class OnsetAnswer:
    disease_id: str
    onset: tuple[float, float]
    pmids: tuple[str, ...]
    matched_phenotype: str | None
    fallback: bool


@dataclass(frozen=True)
class ProfileEntry:
    phenotype: str
    onset_min: float | None
    onset_max: float | None
    stage: str | None
    milestone: str | None
    pmids: tuple[str, ...]


@dataclass(frozen=True)
class TemporalProfile:
    disease_id: str
    entries: tuple[ProfileEntry, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "disease_id": self.disease_id,
            "entries": [
                {"phenotype": e.phenotype, "onset_min": e.onset_min, "onset_max": e.onset_max,
                 "stage": e.stage, "milestone": e.milestone, "pmids": list(e.pmids)}
                for e in self.entries
            ],
        }


class TemporalKG:
    """Read-only in-memory index over validated triples, keyed by disease."""

    def __init__(self, triples: Iterable[TemporalTriple]):
        self._by_disease: dict[str, list[TemporalTriple]] = {}
        self._names: dict[str, str] = {}
        for t in triples:
            did = t.disease_profile_id or t.source_id
            self._by_disease.setdefault(did, []).append(t)
            if t.source_type == "disease":
                self._names.setdefault(normalize(t.source_name), did)
        for members in self._by_disease.values():
            members.sort(key=lambda t: t.edge_id)

    @classmethod
    def load(cls, path: str | Path) -> "TemporalKG":
        return cls(load_tier(path, TierName.VALIDATED).records)

    @property
    def disease_ids(self) -> list[str]:
        return sorted(self._by_disease)

    def resolve(self, disease: str) -> str:
        if disease in self._by_disease:
            return disease
        found = self._names.get(normalize(disease))
        if found is None:
            raise NotFoundError(f"disease {disease!r} not in store")
        return found

    def disease_name(self, disease: str) -> str:
        did = self.resolve(disease)
        for t in self._by_disease[did]:
            if t.source_type == "disease":
                return t.source_name
        return did

    def triples(self, disease: str) -> list[TemporalTriple]:
        return list(self._by_disease[self.resolve(disease)])

    def phenotype_triples(self, disease: str) -> list[TemporalTriple]:
        return [t for t in self.triples(disease) if t.relation == "disease_phenotype_positive"]

    def aggregate(self, disease: str) -> OnsetAggregate:
        return aggregate_onset(self.phenotype_triples(disease))

    def query_onset(self, disease: str, phenotype: str, fuzzy_threshold: int = 80) -> OnsetAnswer:
        did = self.resolve(disease)
        agg = self.aggregate(did)
        if agg.empty:
            raise NotFoundError(f"disease {disease!r} has no onset data")
        key = normalize(phenotype)
        match = next((p for p in agg.per_phenotype if p.phenotype == key), None)
        if match is None:
            scored = [(similarity_ratio(key, p.phenotype), p) for p in agg.per_phenotype]
            scored = [(s, p) for s, p in scored if s >= fuzzy_threshold]
            if scored:
                match = max(scored, key=lambda sp: (sp[0], -sp[1].onset[0]))[1]
        if match is not None:
            return OnsetAnswer(did, match.onset, match.pmids, match.phenotype, fallback=False)
        pmids: list[str] = []
        for p in agg.per_phenotype:
            pmids.extend(x for x in p.pmids if x not in pmids)
        return OnsetAnswer(did, agg.median_range, tuple(pmids), None, fallback=True)  # type: ignore[arg-type]

    def query_stage(self, disease: str, stage: str) -> list[str]:
        key = normalize(stage)
        try:
            rows = self.phenotype_triples(disease)
        except NotFoundError:
            return []
        names = {t.target_name for t in rows if t.temporal.progression_stage and normalize(t.temporal.progression_stage) == key}
        return sorted(names, key=lambda n: normalize(n))

    def stages(self, disease: str) -> list[str]:
        return sorted({normalize(t.temporal.progression_stage) for t in self.phenotype_triples(disease)
                       if t.temporal.progression_stage})

    def temporal_profile(self, disease: str) -> TemporalProfile:
        did = self.resolve(disease)
        rows = [t for t in self.phenotype_triples(did) if t.temporal.is_temporal]
        entries = [
            ProfileEntry(
                phenotype=t.target_name,
                onset_min=t.temporal.onset_age_min,
                onset_max=t.temporal.onset_age_max,
                stage=t.temporal.progression_stage,
                milestone=t.temporal.milestone,
                pmids=t.evidence.source_ids,
            )
            for t in rows
        ]
        # entries without an onset sort after dated ones
        entries.sort(key=lambda e: (e.onset_min is None, e.onset_min or 0.0, normalize(e.phenotype)))
        return TemporalProfile(did, tuple(entries))


# ---------------------------------------------------------------------------
# Store directory
# ---------------------------------------------------------------------------


def _replace_tier(tf: TierFile, records: Sequence[Any]) -> None:
    if not tf.compressed:
        write_records(tf.path, records)
        return
    tf.path.parent.mkdir(parents=True, exist_ok=True)
    tmp = tf.path.with_name(tf.path.name + ".tmp")
    # mtime=0 keeps gzip output byte-stable across runs
    with open(tmp, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
        gz.write("".join(encode_record(r) + "\n" for r in records).encode("utf-8"))
    tmp.replace(tf.path)


class KGStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def flat(self, tier: TierName | str) -> TierFile:
        tier = TierName(tier)
        return TierFile(tier, self.root / FLAT_NAMES[tier])

    def disease_file(self, disease_id: str, tier: TierName | str) -> TierFile:
        tier = TierName(tier)
        suffix = ".jsonl" if tier is TierName.VALIDATED else ".jsonl.gz"
        return TierFile(tier, self.root / "diseases" / disease_id.replace(":", "_") / f"{tier.value}{suffix}")

    def write_disease(self, disease_id: str, tier: TierName | str, records: Sequence[Any]) -> TierFile:
        tf = self.disease_file(disease_id, tier)
        _replace_tier(tf, records)
        return tf

    def merge(self) -> dict[str, int]:
        """Rebuild the flat tier files from the per-disease subtrees."""
        counts = {}
        for tier in TierName:
            records = []
            for d in sorted((self.root / "diseases").glob("*")):
                records.extend(load_tier(self.disease_file(d.name.replace("_", ":", 1), tier).path, tier).records)
            _replace_tier(self.flat(tier), records)
            counts[tier.value] = len(records)
        return counts

    def kg(self) -> TemporalKG:
        return TemporalKG.load(self.flat(TierName.VALIDATED).path)


def iter_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with _open(Path(path), "r") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
