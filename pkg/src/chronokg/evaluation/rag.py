"""Retrieval-condition harness and the long-tail rescue metric."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Protocol, Sequence

from chronokg.benchmark import BenchmarkQuestion, Score, score_answer
from chronokg.consensus import normalize, similarity_ratio
from chronokg.errors import ChronoKGError, DomainError, NotFoundError
from chronokg.evaluation.stats import bootstrap_ci
from chronokg.quality import SchemaIndex
from chronokg.store import TemporalKG

logger = logging.getLogger(__name__)


class Condition(str, Enum):
    NR = "NR"
    STATIC_KG = "StaticKG"
    COARSE_ONSET = "CoarseOnset"
    CHRONO_KG = "ChronoKG"


class Completer(Protocol):
    name: str

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str: ...


@dataclass
class RagSources:
    kg: TemporalKG | None = None
    schema: SchemaIndex | None = None
    coarse: Mapping[str, str] = field(default_factory=dict)  # normalised disease -> onset category


@dataclass(frozen=True)
class Context:
    text: str
    missing: bool = False


def question_target(q: BenchmarkQuestion) -> tuple[str | None, str | None]:
    """(disease, phenotype) a question asks about, when it names one."""
    src = q.gold_source
    disease = src.get("disease") or src.get("disease_id")
    return disease, src.get("phenotype")


def _render_triple(t: Any) -> str:
    tc = t.temporal
    parts = [f"onset {tc.onset_age_min:g}-{tc.onset_age_max:g} years: {t.target_name} in {t.source_name}"]
    parts.append(f"stage {tc.progression_stage or 'n/a'}")
    parts.append("PMIDs " + ", ".join(t.evidence.source_ids))
    return " | ".join(parts)


def build_context(question: BenchmarkQuestion, kind: Condition | str, sources: RagSources, k: int = 5) -> Context:
    kind = Condition(kind)
    if kind is Condition.NR:
        return Context("")
    disease, phenotype = question_target(question)
    if disease is None:
        return Context("", missing=True)
    if kind is Condition.COARSE_ONSET:
        label = sources.coarse.get(normalize(disease))
        return Context(f"{disease}: onset category {label}") if label else Context("", missing=True)
    if kind is Condition.STATIC_KG:
        schema = sources.schema
        did = schema.resolve(disease) if schema is not None else None
        if schema is None or did is None:
            return Context("", missing=True)
        edges = sorted((r, schema.labels.get(t if h == did else h, t if h == did else h))
                       for h, r, t in schema.edges if did in (h, t))
        return Context("\n".join(f"{disease} {r} {name}" for r, name in edges[:k]), missing=not edges)
    kg = sources.kg
    if kg is None:
        return Context("", missing=True)
    try:
        rows = [t for t in kg.phenotype_triples(disease) if t.temporal.has_onset]
    except NotFoundError:
        return Context("", missing=True)
    key = normalize(phenotype) if phenotype else None

    def relevance(t: Any) -> tuple:
        match = key is not None and similarity_ratio(normalize(t.target_name), key) >= 80
        return (not match, -t.evidence.credibility_score, t.edge_id)

    rows.sort(key=relevance)
    return Context("\n".join(_render_triple(t) for t in rows[:k]), missing=not rows)


def build_prompt(question: BenchmarkQuestion, context: str) -> str:
    if not context:
        return question.prompt
    return f"{question.prompt}\n\nContext:\n{context}\n\nAnswer concisely."


@dataclass(frozen=True)
class ItemResult:
    question_id: str
    answer: str | None
    correct: bool
    context: str
    prompt: str
    error: str | None = None


@dataclass
class ConditionResult:
    condition: str
    model: str
    items: list[ItemResult]

    @property
    def accuracy(self) -> float | None:
        return sum(i.correct for i in self.items) / len(self.items) if self.items else None

    def to_dict(self) -> dict[str, Any]:
        return {"condition": self.condition, "model": self.model, "accuracy": self.accuracy,
                "items": [i.__dict__ for i in self.items]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ConditionResult":
        return cls(data["condition"], data["model"], [ItemResult(**i) for i in data["items"]])


def run_condition(questions: Sequence[BenchmarkQuestion], provider: Completer, condition: Condition | str,
                  sources: RagSources, k: int = 5) -> ConditionResult:
    condition = Condition(condition)
    items = []
    for q in questions:
        ctx = build_context(q, condition, sources, k)
        prompt = build_prompt(q, ctx.text)
        try:
            answer = provider.complete(prompt, temperature=0.0)
        except ChronoKGError as exc:
            logger.warning("%s failed on %s: %s", provider.name, q.id, exc)
            items.append(ItemResult(q.id, None, False, ctx.text, prompt, error=type(exc).__name__))
            continue
        items.append(ItemResult(q.id, answer, score_answer(q, answer) is Score.CORRECT, ctx.text, prompt))
    return ConditionResult(condition.value, provider.name, items)


_CONTEXT_RANGE_RE = re.compile(r"(\d+(?:\.\d+)?)\s*(?:-|–|to)\s*(\d+(?:\.\d+)?)\s*years")


class MockRagProvider:
    """Answers with the first age range in the supplied context, else a fixed wrong answer."""

    FALLBACK = "I do not know"

    def __init__(self, name: str = "mock-rag"):
        self.name = name

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        _, sep, context = prompt.partition("\nContext:\n")
        m = _CONTEXT_RANGE_RE.search(context) if sep else None
        return f"{m.group(1)}-{m.group(2)} years" if m else self.FALLBACK


@dataclass(frozen=True)
class RescueResult:
    n_fail: int
    rescued: int
    rate: float | None
    ci: tuple[float, float] | None

    def to_dict(self) -> dict[str, Any]:
        return {"n_fail": self.n_fail, "rescued": self.rescued, "rate": self.rate,
                "ci": list(self.ci) if self.ci else None}


def rescue_rate(nr_result: ConditionResult, cond_result: ConditionResult, resamples: int = 10_000,
                seed: int = 42, level: float = 0.95) -> RescueResult:
    """Fraction of no-retrieval failures that the condition answers correctly."""
    nr = {i.question_id: i.correct for i in nr_result.items}
    cond = {i.question_id: i.correct for i in cond_result.items}
    if set(nr) != set(cond):
        raise DomainError("results cover different question ids")
    failed = sorted(q for q, ok in nr.items() if not ok)
    if not failed:
        return RescueResult(0, 0, None, None)
    outcomes = [1.0 if cond[q] else 0.0 for q in failed]
    rescued = int(sum(outcomes))
    return RescueResult(len(failed), rescued, rescued / len(failed),
                        bootstrap_ci(outcomes, resamples, seed, level))
