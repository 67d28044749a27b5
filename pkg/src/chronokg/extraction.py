"""Knowledge extraction: prompt construction, provider fan-out, response parsing.

PMIDs and publication years are stamped onto every extracted triple from the
source document. Model output is never trusted for provenance.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx

from chronokg.acquisition import SourceDocument
from chronokg.errors import CacheMissError, DomainError, ProviderTimeout, TransportError
from chronokg.model import EVIDENCE_TEXT_CAP, DiseaseProfile, PipelineConfig, TemporalContext

logger = logging.getLogger(__name__)

CONFIDENCE_LEVELS = ("high", "medium", "low")
EMPTY_LIST_MARKER = "(none listed)"

PRIMARY_TEMPLATE = """\
You are a temporal biomedical knowledge extraction system. Your PRIMARY
task is to extract relationships WITH TEMPORAL GROUNDING from the text
about {disease_name}.

CRITICAL: Every relationship you extract MUST include temporal information
when available.

Extraction priorities (highest to lowest):
1. TEMPORAL FACTS: onset ages, disease milestones, progression timelines,
   treatment timing, discovery dates
2. EVIDENCE-DATED FACTS: relationships anchored by publication year
3. CONDITIONAL FACTS: relationships that depend on age, stage, genetic
   subtype
4. STATIC FACTS: general relationships without temporal context

Output format (JSON):
{
  "triples": [
    {
      "subject": "entity name",
      "subject_type": "disease|gene/protein|drug|phenotype|anatomy|...",
      "relation": "disease_protein|indication|disease_phenotype_positive|...",
      "object": "entity name",
      "object_type": "same vocabulary as subject_type",
      "confidence": "high|medium|low",
      "evidence_text": "exact quote from source (max 200 chars)",
      "temporal_context": {
        "onset_age_min": 3.0,
        "onset_age_max": 12.0,
        "progression_stage": "ambulatory",
        "milestone": "loss of ambulation",
        "discovery_year": 2015,
        "temporal_qualifier": "by age 12"
      },
      "conditions": {
        "age_group": "pediatric",
        "genetic_subtype": "exon deletion"
      }
    }
  ]
}

Disease context:
- Name: {disease_name}
- Category: {disease_category}
- Inheritance: {inheritance_pattern}
- Known genes: {known_genes}
- Key phenotypes: {known_phenotypes}
- Differential diagnoses: {differential_diseases}

Source text:
{text}

Extract ALL temporally-grounded relationships. Return valid JSON only.
"""

TEMPORAL_HEADER = "SECOND PASS - TEMPORAL ONLY: Find temporal information that was missed."

TEMPORAL_TEMPLATE = (
    TEMPORAL_HEADER
    + """
Extract ONLY relationships with temporal grounding: ages, stages, durations,
progression, milestones. Skip any fact without temporal content.

Output format (JSON): same as primary extraction, but 'temporal_context'
field is REQUIRED (non-null).

Disease: {disease_name}

Source text:
{text}
"""
)


@dataclass(frozen=True)
class RawTriple:
    subject: str
    subject_type: str
    relation: str
    object: str
    object_type: str
    confidence: str
    evidence_text: str
    temporal_context: TemporalContext | None
    conditions: Mapping[str, Any] | None
    model: str
    pmid: str
    publication_year: int | None = None

    @property
    def is_temporal(self) -> bool:
        return self.temporal_context is not None and self.temporal_context.is_temporal

    def key(self) -> tuple[str, str, str]:
        return (self.subject.strip(), self.relation.strip(), self.object.strip())

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["temporal_context"] = self.temporal_context.to_dict() if self.temporal_context else None
        d["conditions"] = dict(self.conditions) if self.conditions is not None else None
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RawTriple":
        tc = data.get("temporal_context")
        return cls(
            subject=data["subject"],
            subject_type=data.get("subject_type", ""),
            relation=data["relation"],
            object=data["object"],
            object_type=data.get("object_type", ""),
            confidence=data.get("confidence", "low"),
            evidence_text=data.get("evidence_text", ""),
            temporal_context=TemporalContext.from_dict(tc) if tc else None,
            conditions=data.get("conditions"),
            model=data.get("model", ""),
            pmid=str(data.get("pmid", "")),
            publication_year=data.get("publication_year"),
        )


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class ModelProvider(Protocol):
    name: str

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ChatCompletionProvider:
    """Live provider speaking the OpenAI-style ``/chat/completions`` protocol."""

    def __init__(
        self,
        name: str,
        model: str,
        base_url: str,
        api_key_env: str,
        *,
        max_tokens: int = 4096,
        client: httpx.Client | None = None,
    ):
        self.name = name
        self.model = model
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.max_tokens = max_tokens
        self._client = client or httpx.Client()

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise TransportError(f"{self.name}: environment variable {self.api_key_env} is not set")
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.max_tokens,
        }
        try:
            resp = self._client.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"{self.name}: no response within {timeout}s") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"{self.name}: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"{self.name}: HTTP {resp.status_code}", attempts=1)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"{self.name}: malformed completion payload") from exc


class ReplayProvider:
    """Serves recorded responses from ``<root>/<name>/<sha256(prompt)>.json``.

    A record may hold ``{"error": "timeout"}`` to replay a timed-out call.
    """

    def __init__(self, name: str, root: str | Path):
        self.name = name
        self.root = Path(root) / name

    def path_for(self, prompt: str) -> Path:
        return self.root / f"{prompt_hash(prompt)}.json"

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        path = self.path_for(prompt)
        if not path.exists():
            raise CacheMissError(f"{self.name}: no recorded response for prompt {path.stem[:12]}")
        record = json.loads(path.read_text(encoding="utf-8"))
        if record.get("error") == "timeout":
            raise ProviderTimeout(f"{self.name}: recorded timeout")
        return record["response"]


class RecordingProvider:
    """Wraps another provider and writes each exchange in replay layout."""

    def __init__(self, inner: ModelProvider, root: str | Path):
        self.inner = inner
        self.name = inner.name
        self.root = Path(root) / inner.name

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / f"{prompt_hash(prompt)}.json"
        try:
            response = self.inner.complete(prompt, temperature=temperature, timeout=timeout)
        except ProviderTimeout:
            _write_json(path, {"model": self.name, "error": "timeout"})
            raise
        _write_json(path, {"model": self.name, "response": response})
        return response


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=1, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


_AGE = r"(\d+(?:\.\d+)?)"
_ONSET_RE = re.compile(
    r"(?P<phen>[A-Za-z][A-Za-z' \-]*?)\s+(?:typically\s+|usually\s+|often\s+)?"
    r"(?:presents|develops|appears|manifests|begins|occurs|is observed)\s+"
    r"(?:at|between|from)\s+(?:age\s+|ages\s+)?" + _AGE + r"\s*(?:to|and|-|–)\s*" + _AGE +
    r"\s+(?P<unit>years?|months?)",
    re.IGNORECASE,
)
_STAGE_RE = re.compile(r"during the (?P<stage>[a-z\- ]+?) stage", re.IGNORECASE)
_MILESTONE_RE = re.compile(r"\(milestone: (?P<m>[^)]+)\)", re.IGNORECASE)
_GENE_RE = re.compile(r"caused by (?:pathogenic )?(?:variants|mutations) in (?:the )?(?P<gene>[A-Z0-9]{2,})")
_NAME_RE = re.compile(r"^- Name: (?P<name>.+)$|^Disease: (?P<name2>.+)$", re.MULTILINE)


class MockExtractor:
    """Deterministic rule-based stand-in for an extraction LLM.

    It reads the ``Source text`` section of a prompt and turns fixed sentence
    shapes into triples. ``style`` varies the surface form so consensus has
    something to reconcile:

    * ``plain``: lowercase entities, canonical relation names
    * ``verbose``: capitalised entities, alias relation names, abbreviations
      in parentheses, output wrapped in a markdown fence
    * ``sparse``: only the first ``limit`` facts
    * ``empty``: never finds anything
    * ``garbage``: answers in prose
    """

    def __init__(self, name: str, style: str = "plain", limit: int = 2, drop_temporal: bool = False):
        self.name = name
        self.style = style
        self.limit = limit
        self.drop_temporal = drop_temporal

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        if self.style == "garbage":
            return "I could not find any relationships in this text."
        second_pass = prompt.startswith(TEMPORAL_HEADER)
        text = prompt.split("Source text:\n", 1)[-1]
        text = text.split("\n\nExtract ALL", 1)[0]
        m = _NAME_RE.search(prompt)
        disease = (m.group("name") or m.group("name2")).strip() if m else "unknown disease"
        triples: list[dict[str, Any]] = []
        if self.style != "empty":
            for sentence in re.split(r"(?<=\.)\s+", text):
                triples.extend(self._facts(sentence, disease, second_pass))
        if self.style == "sparse":
            triples = triples[: self.limit]
        body = json.dumps({"triples": triples}, indent=1)
        if self.style == "verbose":
            return f"```json\n{body}\n```"
        return body

    def _facts(self, sentence: str, disease: str, second_pass: bool) -> list[dict[str, Any]]:
        out = []
        verbose = self.style == "verbose"
        quote = sentence.strip()[:200]
        onset = _ONSET_RE.search(sentence)
        if onset:
            lo, hi = float(onset.group(2)), float(onset.group(3))
            if onset.group("unit").lower().startswith("month"):
                lo, hi = round(lo / 12, 2), round(hi / 12, 2)
            phen = onset.group("phen").strip()
            phen = re.sub(r"^(?:in [^,]+,\s*)", "", phen, flags=re.IGNORECASE)
            stage = _STAGE_RE.search(sentence)
            milestone = _MILESTONE_RE.search(sentence)
            temporal = None
            if not (self.drop_temporal and not second_pass):
                temporal = {
                    "onset_age_min": lo,
                    "onset_age_max": hi,
                    "progression_stage": stage.group("stage").strip() if stage else None,
                    "milestone": milestone.group("m").strip() if milestone else None,
                    "temporal_qualifier": None,
                }
            out.append(
                {
                    "subject": disease if not verbose else disease.title(),
                    "subject_type": "disease",
                    "relation": "has phenotype" if verbose else "disease_phenotype_positive",
                    "object": phen.capitalize() if verbose else phen.lower(),
                    "object_type": "phenotype",
                    "confidence": "high" if not verbose else "medium",
                    "evidence_text": quote,
                    "temporal_context": temporal,
                    "conditions": None,
                }
            )
        gene = _GENE_RE.search(sentence)
        if gene and not second_pass:
            out.append(
                {
                    "subject": disease if not verbose else f"{disease.title()} ({_initials(disease)})",
                    "subject_type": "disease",
                    "relation": "associated gene" if verbose else "disease_protein",
                    "object": gene.group("gene"),
                    "object_type": "gene/protein",
                    "confidence": "high",
                    "evidence_text": quote,
                    "temporal_context": None,
                    "conditions": None,
                }
            )
        return out


def _initials(name: str) -> str:
    return "".join(w[0].upper() for w in name.split() if w[0].isalpha())


# ---------------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------------


def _fmt_list(values: Sequence[str]) -> str:
    return ", ".join(values) if values else EMPTY_LIST_MARKER


def _fill(template: str, values: Mapping[str, str]) -> str:
    # str.format would choke on the literal JSON braces in the template
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def build_primary_prompt(profile: DiseaseProfile, doc: SourceDocument) -> str:
    return _fill(
        PRIMARY_TEMPLATE,
        {
            "disease_name": profile.name or EMPTY_LIST_MARKER,
            "disease_category": profile.category or EMPTY_LIST_MARKER,
            "inheritance_pattern": profile.inheritance_pattern or EMPTY_LIST_MARKER,
            "known_genes": _fmt_list(profile.known_genes),
            "known_phenotypes": _fmt_list(profile.known_phenotypes),
            "differential_diseases": _fmt_list(profile.differential_diseases),
            "text": doc.text,
        },
    )


def build_temporal_prompt(doc: SourceDocument, profile: DiseaseProfile | None = None) -> str:
    name = profile.name if profile is not None else EMPTY_LIST_MARKER
    return _fill(TEMPORAL_TEMPLATE, {"disease_name": name, "text": doc.text})


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json|JSON)?\s*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")
_REQUIRED = ("subject", "relation", "object")


def _repair_candidates(text: str) -> Iterable[tuple[str, str]]:
    yield "strict", text
    fenced = _FENCE_RE.search(text)
    if fenced:
        text = fenced.group(1)
        yield "strip-fences", text
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        text = text[start : end + 1]
        yield "outer-braces", text
    yield "trailing-commas", _TRAILING_COMMA_RE.sub(r"\1", text)


def _load_lenient(text: str) -> tuple[Any, list[str]]:
    diagnostics: list[str] = []
    for step, candidate in _repair_candidates(text):
        try:
            obj = json.loads(candidate)
        except (json.JSONDecodeError, TypeError):
            continue
        if step != "strict":
            diagnostics.append(f"repaired:{step}")
        return obj, diagnostics
    diagnostics.append("parse-failure")
    return None, diagnostics


def _temporal_from_model(raw: Any) -> TemporalContext | None:
    if not isinstance(raw, Mapping):
        return None
    data = dict(raw)
    year = data.pop("discovery_year", None)
    if year is not None and data.get("discovery_date") is None:
        data["discovery_date"] = str(year)
    try:
        ctx = TemporalContext.from_dict(data)
    except TypeError:
        return None
    return ctx if ctx.is_temporal or ctx.discovery_date else None


def parse_extraction_response(
    text: Any,
    *,
    model: str = "",
    pmid: str = "",
    publication_year: int | None = None,
) -> tuple[list[RawTriple], list[str]]:
    """Parse model output into triples, degrading to ``([], diagnostics)``.

    Never raises. Triples lacking a subject, relation, or object are dropped
    with a diagnostic.
    """
    if not isinstance(text, str):
        return [], ["parse-failure:not-text"]
    obj, diagnostics = _load_lenient(text)
    if obj is None:
        return [], diagnostics
    items = obj.get("triples") if isinstance(obj, Mapping) else obj
    if not isinstance(items, list):
        return [], diagnostics + ["parse-failure:no-triples-array"]
    out: list[RawTriple] = []
    for i, item in enumerate(items):
        if not isinstance(item, Mapping):
            diagnostics.append(f"dropped[{i}]:not-an-object")
            continue
        missing = [k for k in _REQUIRED if not isinstance(item.get(k), str) or not item[k].strip()]
        if missing:
            diagnostics.append(f"dropped[{i}]:missing-{'+'.join(missing)}")
            continue
        confidence = str(item.get("confidence", "low")).strip().lower()
        if confidence not in CONFIDENCE_LEVELS:
            confidence = "low"
        conditions = item.get("conditions")
        out.append(
            RawTriple(
                subject=item["subject"].strip(),
                subject_type=str(item.get("subject_type") or "").strip(),
                relation=item["relation"].strip(),
                object=item["object"].strip(),
                object_type=str(item.get("object_type") or "").strip(),
                confidence=confidence,
                evidence_text=str(item.get("evidence_text") or "")[:EVIDENCE_TEXT_CAP],
                temporal_context=_temporal_from_model(item.get("temporal_context")),
                conditions=dict(conditions) if isinstance(conditions, Mapping) else None,
                model=model,
                pmid=pmid,
                publication_year=publication_year,
            )
        )
    return out, diagnostics


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def should_invoke_tiebreaker(per_model_triple_counts: Sequence[int]) -> bool:
    if len(per_model_triple_counts) < 2:
        raise DomainError("tiebreaker rule needs counts for at least two primary models")
    return any(c == 0 for c in per_model_triple_counts)


@dataclass
class ExtractionResult:
    pmid: str
    per_model: dict[str, list[RawTriple]]
    models_processed: list[str]
    tiebreaker_invoked: bool = False
    second_pass: bool = False
    diagnostics: list[str] = field(default_factory=list)

    @property
    def total_models(self) -> int:
        return len(self.models_processed)

    def all_triples(self) -> list[RawTriple]:
        return [t for name in sorted(self.per_model) for t in self.per_model[name]]

    def summary(self) -> dict[str, Any]:
        """Everything except the triples themselves, which live in the raw tier."""
        return {
            "pmid": self.pmid,
            "models_processed": list(self.models_processed),
            "counts": {k: len(v) for k, v in sorted(self.per_model.items())},
            "tiebreaker_invoked": self.tiebreaker_invoked,
            "second_pass": self.second_pass,
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_summary(cls, summary: Mapping[str, Any], triples: Iterable[RawTriple]) -> "ExtractionResult":
        per_model: dict[str, list[RawTriple]] = {m: [] for m in summary["models_processed"]}
        for t in triples:
            if t.pmid == summary["pmid"] and t.model in per_model:
                per_model[t.model].append(t)
        return cls(
            pmid=summary["pmid"],
            per_model=per_model,
            models_processed=list(summary["models_processed"]),
            tiebreaker_invoked=summary.get("tiebreaker_invoked", False),
            second_pass=summary.get("second_pass", False),
            diagnostics=list(summary.get("diagnostics", [])),
        )


def _dedupe(triples: Iterable[RawTriple]) -> list[RawTriple]:
    seen: set[tuple[str, str, str]] = set()
    out = []
    for t in triples:
        if t.key() not in seen:
            seen.add(t.key())
            out.append(t)
    return out


def _merge_exact(first: list[RawTriple], extra: list[RawTriple]) -> list[RawTriple]:
    out = list(first)
    for t in extra:
        if t not in out:
            out.append(t)
    return out


def _ask(
    provider: ModelProvider, prompt: str, doc: SourceDocument, timeout: float
) -> tuple[list[RawTriple] | None, list[str]]:
    """One provider call. ``None`` means the model did not process the document."""
    try:
        text = provider.complete(prompt, temperature=0.0, timeout=timeout)
    except ProviderTimeout:
        return None, [f"{provider.name}:timeout"]
    except TransportError as exc:
        return None, [f"{provider.name}:transport-error:{exc}"]
    triples, diags = parse_extraction_response(
        text, model=provider.name, pmid=doc.pmid, publication_year=doc.publication_year
    )
    return _dedupe(triples), [f"{provider.name}:{d}" for d in diags]


def _fan_out(
    providers: Sequence[ModelProvider], prompt: str, doc: SourceDocument, config: PipelineConfig
) -> dict[str, tuple[list[RawTriple] | None, list[str]]]:
    workers = max(1, min(config.max_in_flight, len(providers)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {p.name: pool.submit(_ask, p, prompt, doc, config.provider_timeout) for p in providers}
        return {name: futures[name].result() for name in sorted(futures)}


def extract_document(
    doc: SourceDocument,
    profile: DiseaseProfile,
    providers: Sequence[ModelProvider],
    config: PipelineConfig,
    tiebreaker: ModelProvider | None = None,
) -> ExtractionResult:
    """Run every primary provider on one document, plus the tiebreaker and
    second temporal pass when their triggers fire."""
    if len(providers) < 2:
        raise DomainError("extraction needs at least two primary providers")
    names = [p.name for p in providers] + ([tiebreaker.name] if tiebreaker else [])
    if len(set(names)) != len(names):
        raise DomainError(f"provider names must be unique: {names}")

    primary = build_primary_prompt(profile, doc)
    answers = _fan_out(providers, primary, doc, config)
    per_model: dict[str, list[RawTriple]] = {}
    diagnostics: list[str] = []
    for name, (triples, diags) in answers.items():
        diagnostics.extend(diags)
        if triples is not None:
            per_model[name] = triples

    counts = [len(answers[p.name][0] or []) for p in providers]
    invoked = tiebreaker is not None and should_invoke_tiebreaker(counts)
    if invoked:
        triples, diags = _ask(tiebreaker, primary, doc, config.provider_timeout)
        diagnostics.extend(diags)
        if triples is not None:
            per_model[tiebreaker.name] = triples

    n_temporal = len({t.key() for ts in per_model.values() for t in ts if t.is_temporal})
    second = n_temporal < config.temporal_floor and bool(per_model)
    if second:
        active = [p for p in list(providers) + ([tiebreaker] if invoked else []) if p.name in per_model]
        followup = _fan_out(active, build_temporal_prompt(doc, profile), doc, config)
        for name, (triples, diags) in followup.items():
            diagnostics.extend(d + ":second-pass" for d in diags)
            if triples:
                per_model[name] = _merge_exact(per_model[name], triples)

    return ExtractionResult(
        pmid=doc.pmid,
        per_model={k: per_model[k] for k in sorted(per_model)},
        models_processed=sorted(per_model),
        tiebreaker_invoked=invoked,
        second_pass=second,
        diagnostics=diagnostics,
    )
