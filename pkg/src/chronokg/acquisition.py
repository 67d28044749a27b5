"""Disease profiling and evidence harvesting.

Sources come in two interchangeable flavours: live (NCBI E-utilities over
HTTP) and fixture (JSON files on disk). Harvest results are cached per
disease so a second run is fully offline.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx

from chronokg.errors import DomainError, NotFoundError, TransportError
from chronokg.model import DiseaseProfile, PipelineConfig, StudyType, Tier

logger = logging.getLogger(__name__)

CURIE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.]*:[A-Za-z0-9_.\-]+$")
FETCH_BATCH = 50


@dataclass(frozen=True)
class SourceDocument:
    pmid: str
    title: str
    text: str
    pmc_id: str | None = None
    publication_year: int | None = None
    journal: str | None = None
    study_type: str = StudyType.OTHER.value
    pre_rank_score: float = 0.0
    # optional bibliometric metadata; absent in most sources
    journal_tier: float | None = None
    citation_count: int | None = None
    replication_signal: float | None = None
    is_retracted: bool | None = None

    def __post_init__(self) -> None:
        if not self.pmid or not str(self.pmid).isdigit():
            raise DomainError(f"PMID must be numeric, got {self.pmid!r}")
        if not self.text or not self.text.strip():
            raise DomainError(f"document {self.pmid} has no text")

    def to_dict(self) -> dict[str, Any]:
        return {
            "pmid": self.pmid,
            "pmc_id": self.pmc_id,
            "title": self.title,
            "text": self.text,
            "publication_year": self.publication_year,
            "journal": self.journal,
            "study_type": self.study_type,
            "pre_rank_score": self.pre_rank_score,
            "journal_tier": self.journal_tier,
            "citation_count": self.citation_count,
            "replication_signal": self.replication_signal,
            "is_retracted": self.is_retracted,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SourceDocument":
        study = data.get("study_type")
        if study is None:
            study = label_study_type(data.get("publication_types") or (), data.get("title", ""))
        return cls(
            pmid=str(data["pmid"]).removeprefix("PMID:"),
            pmc_id=data.get("pmc_id"),
            title=data.get("title", ""),
            text=data.get("text") or data.get("abstract") or "",
            publication_year=data.get("publication_year"),
            journal=data.get("journal"),
            study_type=StudyType.parse(study).value,
            pre_rank_score=float(data.get("pre_rank_score", 0.0)),
            journal_tier=data.get("journal_tier"),
            citation_count=data.get("citation_count"),
            replication_signal=data.get("replication_signal"),
            is_retracted=data.get("is_retracted"),
        )


# ---------------------------------------------------------------------------
# Pure helpers
# ---------------------------------------------------------------------------


def assign_tier(article_count: int) -> Tier:
    if article_count < 0:
        raise DomainError("article count cannot be negative")
    if article_count >= 100:
        return Tier.STANDARD
    if article_count >= 20:
        return Tier.LIGHT
    return Tier.MINIMAL


_STUDY_RULES: list[tuple[str, StudyType]] = [
    ("meta-analysis", StudyType.META_ANALYSIS),
    ("practice guideline", StudyType.GUIDELINE),
    ("guideline", StudyType.GUIDELINE),
    ("randomized controlled trial", StudyType.RCT),
    ("database", StudyType.DATABASE),
    ("registry", StudyType.DATABASE),
    ("cohort", StudyType.COHORT),
    ("case-control", StudyType.CASE_CONTROL),
    ("systematic review", StudyType.REVIEW),
    ("review", StudyType.REVIEW),
    ("case series", StudyType.CASE_SERIES),
    ("case reports", StudyType.CASE_REPORT),
    ("case report", StudyType.CASE_REPORT),
    ("editorial", StudyType.EXPERT_OPINION),
    ("comment", StudyType.EXPERT_OPINION),
]


def label_study_type(publication_types: Sequence[str], title: str = "") -> str:
    """Keyword rules over publication-type metadata, falling back to the title."""
    for source in (" | ".join(publication_types).lower(), title.lower()):
        for needle, kind in _STUDY_RULES:
            if needle in source:
                return kind.value
    return StudyType.OTHER.value


def recency_signal(publication_year: int | None, reference_year: int, horizon: int = 50) -> float | None:
    if publication_year is None:
        return None
    age = max(0, reference_year - publication_year)
    return max(0.0, 1.0 - age / horizon)


def pre_rank(doc: SourceDocument, reference_year: int = 2026, recency: float | None = None) -> float:
    """Equal-weight blend of journal tier and recency; missing signals count 0."""
    if recency is None:
        recency = recency_signal(doc.publication_year, reference_year)
    signals = [doc.journal_tier, recency]
    score = sum(0.5 * (s or 0.0) for s in signals)
    return min(1.0, max(0.0, score))


def build_query(profile: DiseaseProfile) -> str:
    terms = [profile.name, *profile.synonyms]
    seen: list[str] = []
    for t in terms:
        if t and t.lower() not in (s.lower() for s in seen):
            seen.append(t)
    return " OR ".join(f'"{t}"[tiab]' for t in seen)


# ---------------------------------------------------------------------------
# Source contracts
# ---------------------------------------------------------------------------


class OntologySource(Protocol):
    def lookup(self, disease_id: str) -> Mapping[str, Any]:
        ...


class DocumentSource(Protocol):
    version: str

    def search(self, query: str) -> list[str]:
        ...

    def fetch(self, pmids: Sequence[str]) -> list[SourceDocument]:
        ...


def curie_filename(disease_id: str) -> str:
    return disease_id.replace(":", "_")


class FixtureOntologySource:
    """Reads ``<root>/ontology/<PREFIX_ID>.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def lookup(self, disease_id: str) -> Mapping[str, Any]:
        path = self.root / "ontology" / f"{curie_filename(disease_id)}.json"
        if not path.exists():
            raise NotFoundError(f"disease {disease_id} not in ontology fixtures")
        return json.loads(path.read_text(encoding="utf-8"))


class FixtureDocumentSource:
    """Reads ``<root>/documents/<pmid>.json``; search is term matching on title + text."""

    def __init__(self, root: str | Path, version: str = "fixture-1"):
        self.root = Path(root) / "documents"
        self.version = version
        self.requests = 0

    def _all(self) -> list[dict[str, Any]]:
        return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(self.root.glob("*.json"))]

    def search(self, query: str) -> list[str]:
        self.requests += 1
        terms = [t.lower() for t in re.findall(r'"([^"]+)"', query)] or [query.lower()]
        hits = []
        for doc in self._all():
            haystack = f"{doc.get('title', '')} {doc.get('text', '')}".lower()
            if any(t in haystack for t in terms):
                hits.append(str(doc["pmid"]))
        return sorted(hits, key=int)

    def fetch(self, pmids: Sequence[str]) -> list[SourceDocument]:
        self.requests += 1
        out = []
        for pmid in pmids:
            path = self.root / f"{pmid}.json"
            if not path.exists():
                raise TransportError(f"fixture document {pmid} missing")
            out.append(SourceDocument.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        return out


class TokenBucket:
    """Blocking token bucket; ``rate`` tokens per second, burst of ``capacity``."""

    def __init__(self, rate: float, capacity: float | None = None, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.rate = rate
        self.capacity = capacity if capacity is not None else rate
        self.tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
                self._last = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                self._sleep((1 - self.tokens) / self.rate)


class EutilsDocumentSource:
    """PubMed via NCBI E-utilities (``esearch`` + ``efetch``)."""

    BASE = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils"

    def __init__(
        self,
        *,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        max_results: int = 1000,
        max_retries: int = 4,
        backoff: float = 0.5,
        rate: float | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.api_key = api_key if api_key is not None else os.environ.get("NCBI_API_KEY")
        self.client = client or httpx.Client(timeout=30.0)
        self.max_results = max_results
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self.bucket = TokenBucket(rate or (10.0 if self.api_key else 3.0), sleep=sleep)
        self.version = "eutils-1"

    def _get(self, endpoint: str, params: dict[str, Any]) -> httpx.Response:
        if self.api_key:
            params = {**params, "api_key": self.api_key}
        delay = self.backoff
        for attempt in range(1, self.max_retries + 1):
            self.bucket.acquire()
            try:
                resp = self.client.get(f"{self.BASE}/{endpoint}", params=params)
            except httpx.HTTPError as exc:
                if attempt == self.max_retries:
                    raise TransportError(f"{endpoint}: {exc}", attempts=attempt) from exc
            else:
                if resp.status_code == 200:
                    return resp
                if resp.status_code not in (429, 500, 502, 503):
                    raise TransportError(f"{endpoint}: HTTP {resp.status_code}", attempts=attempt)
                if attempt == self.max_retries:
                    raise TransportError(
                        f"{endpoint}: HTTP {resp.status_code} after {attempt} attempts",
                        attempts=attempt,
                        retry_after=delay,
                    )
            self._sleep(delay)
            delay *= 2
        raise AssertionError("unreachable")

    def search(self, query: str) -> list[str]:
        resp = self._get(
            "esearch.fcgi",
            {"db": "pubmed", "term": query, "retmode": "json", "retmax": self.max_results},
        )
        return list(resp.json()["esearchresult"].get("idlist", []))

    def fetch(self, pmids: Sequence[str]) -> list[SourceDocument]:
        if not pmids:
            return []
        resp = self._get("efetch.fcgi", {"db": "pubmed", "id": ",".join(pmids), "retmode": "xml"})
        return parse_pubmed_xml(resp.text)


def parse_pubmed_xml(xml_text: str) -> list[SourceDocument]:
    root = ET.fromstring(xml_text)
    docs = []
    for art in root.iter("PubmedArticle"):
        pmid = art.findtext(".//PMID") or ""
        title = "".join(art.find(".//ArticleTitle").itertext()) if art.find(".//ArticleTitle") is not None else ""
        abstract = " ".join("".join(node.itertext()).strip() for node in art.iter("AbstractText"))
        year_text = art.findtext(".//PubDate/Year") or art.findtext(".//ArticleDate/Year")
        pub_types = [pt.text or "" for pt in art.iter("PublicationType")]
        pmc = None
        for aid in art.iter("ArticleId"):
            if aid.get("IdType") == "pmc":
                pmc = aid.text
        if not abstract.strip():
            continue
        docs.append(
            SourceDocument(
                pmid=pmid,
                pmc_id=pmc,
                title=title,
                text=abstract,
                publication_year=int(year_text) if year_text and year_text.isdigit() else None,
                journal=art.findtext(".//Journal/Title"),
                study_type=label_study_type(pub_types, title),
            )
        )
    return docs


# ---------------------------------------------------------------------------
# Agent operations
# ---------------------------------------------------------------------------


def profile_disease(disease_id: str, ontology_source: OntologySource) -> DiseaseProfile:
    if not CURIE_RE.match(disease_id or ""):
        raise NotFoundError(f"not a CURIE: {disease_id!r}")
    raw = dict(ontology_source.lookup(disease_id))
    count = int(raw.get("pubmed_count", 0))
    return DiseaseProfile(
        disease_id=disease_id,
        name=raw["name"],
        synonyms=tuple(raw.get("synonyms") or ()),
        differential_diseases=tuple(raw.get("differential_diseases") or ()),
        known_genes=tuple(raw.get("known_genes") or ()),
        known_phenotypes=tuple(raw.get("known_phenotypes") or ()),
        category=raw.get("category"),
        inheritance_pattern=raw.get("inheritance_pattern"),
        pubmed_count=count,
        pmc_fulltext_available=bool(raw.get("pmc_fulltext_available", False)),
        tier=assign_tier(count),
    )


@dataclass
class HarvestResult:
    documents: list[SourceDocument]
    warnings: list[str] = field(default_factory=list)
    from_cache: bool = False


def _cache_dir(cache_root: Path, profile: DiseaseProfile) -> Path:
    return cache_root / curie_filename(profile.disease_id)


def _read_cache(path: Path, version: str) -> HarvestResult | None:
    manifest = path / "manifest.json"
    if not manifest.exists():
        return None
    meta = json.loads(manifest.read_text(encoding="utf-8"))
    if meta.get("source_version") != version:
        return None
    docs = [SourceDocument.from_dict(d) for d in json.loads((path / "documents.json").read_text(encoding="utf-8"))]
    return HarvestResult(docs, list(meta.get("warnings", [])), from_cache=True)


def _write_cache(path: Path, profile: DiseaseProfile, version: str, result: HarvestResult) -> None:
    from chronokg.io import atomic_write_text

    path.mkdir(parents=True, exist_ok=True)
    atomic_write_text(
        path / "documents.json",
        json.dumps([d.to_dict() for d in result.documents], indent=1, ensure_ascii=False) + "\n",
    )
    manifest = {
        "disease_id": profile.disease_id,
        "source_version": version,
        "tier": profile.tier.value,
        "pmids": [d.pmid for d in result.documents],
        "warnings": result.warnings,
    }
    atomic_write_text(path / "manifest.json", json.dumps(manifest, indent=1) + "\n")


def harvest(
    profile: DiseaseProfile,
    document_source: DocumentSource,
    config: PipelineConfig,
    cache_root: str | Path | None = None,
    reference_year: int = 2026,
) -> HarvestResult:
    """Retrieve, rank, and cap the documents for one disease.

    Ordering is descending pre-rank score, ties by ascending PMID. A fetch
    failure keeps the batches retrieved before it and records a warning.
    """
    cache_path = _cache_dir(Path(cache_root), profile) if cache_root is not None else None
    if cache_path is not None:
        cached = _read_cache(cache_path, document_source.version)
        if cached is not None:
            return cached

    pmids = document_source.search(build_query(profile))
    batches = [pmids[i : i + FETCH_BATCH] for i in range(0, len(pmids), FETCH_BATCH)]
    warnings: list[str] = []
    fetched: list[SourceDocument] = []
    if batches:
        with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
            futures = [pool.submit(document_source.fetch, b) for b in batches]
            for i, fut in enumerate(futures):
                try:
                    fetched.extend(fut.result())
                except TransportError as exc:
                    warnings.append(f"partial-fetch: stopped at batch {i + 1}/{len(batches)}: {exc}")
                    break

    ranked = [
        SourceDocument(**{**d.to_dict(), "pre_rank_score": pre_rank(d, reference_year)}) for d in fetched
    ]
    ranked.sort(key=lambda d: (-d.pre_rank_score, int(d.pmid)))
    cap = config.document_caps.get(profile.tier.value)
    if cap is not None:
        ranked = ranked[:cap]
    result = HarvestResult(ranked, warnings)
    if cache_path is not None:
        _write_cache(cache_path, profile, document_source.version, result)
    return result
