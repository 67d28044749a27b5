"""Temporal QA benchmark: template question generators, automated QC, scoring rubrics.

Every question is produced from code templates over structured sources, so
generation is deterministic for a given seed. Answer ranges are read with a
small grammar::

    range   := age [sep age] [unit]
    age     := digits ["." digits] [unit]
    sep     := "-" | "–" | "to" | "and"
    unit    := "years" | "year" | "yrs" | "y" | "months" | "month" | "mo"

A leading "between" is ignored. Month values are converted to years.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from chronokg.consensus import normalize
from chronokg.errors import DomainError
from chronokg.io import atomic_write_text
from chronokg.model import AGE_MAX, DEFAULT_BIN_TABLE, OnsetBinTable, era_of_range
from chronokg.quality import SchemaIndex
from chronokg.store import TemporalKG
from chronokg.validation import GoldRecord, PhenopacketCase, normalize_disease_name, overlaps

logger = logging.getLogger(__name__)

LETTERS = "ABCD"
OUTSIDE_MARGIN = 2.0
DISTRACTOR_ERA_DISTANCE = 2


class TaskType(str, Enum):
    TEMPORAL_WINDOW = "temporal_window"
    TEMPORAL_DIFFERENTIAL = "temporal_differential"
    CROSS_DISEASE_COMPARISON = "cross_disease_comparison"
    PHENOPACKETS_ONSET = "phenopackets_onset"
    PHENOTYPE_ORDERING = "phenotype_ordering"
    STAGE_CONDITIONAL = "stage_conditional"
    STATIC_DRUG = "static_drug"
    STATIC_GENE = "static_gene"
    NEGATIVE_TEMPORAL = "negative_temporal"


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


DIFFICULTY = {
    TaskType.TEMPORAL_WINDOW: Difficulty.MEDIUM,
    TaskType.CROSS_DISEASE_COMPARISON: Difficulty.MEDIUM,
    TaskType.TEMPORAL_DIFFERENTIAL: Difficulty.HARD,
    TaskType.PHENOTYPE_ORDERING: Difficulty.HARD,
    TaskType.STAGE_CONDITIONAL: Difficulty.HARD,
    TaskType.PHENOPACKETS_ONSET: Difficulty.HARD,
    TaskType.NEGATIVE_TEMPORAL: Difficulty.HARD,
    TaskType.STATIC_DRUG: Difficulty.EASY,
    TaskType.STATIC_GENE: Difficulty.EASY,
}

TIER = {
    TaskType.TEMPORAL_WINDOW: "tier1",
    TaskType.TEMPORAL_DIFFERENTIAL: "tier1",
    TaskType.CROSS_DISEASE_COMPARISON: "tier1",
    TaskType.PHENOPACKETS_ONSET: "tier1",
    TaskType.PHENOTYPE_ORDERING: "tier2",
    TaskType.STAGE_CONDITIONAL: "tier2",
    TaskType.STATIC_DRUG: "static",
    TaskType.STATIC_GENE: "static",
    TaskType.NEGATIVE_TEMPORAL: "supplementary",
}

# how each type's answer is scored
ANSWER_FORMAT = {
    TaskType.TEMPORAL_WINDOW: "yesno",
    TaskType.TEMPORAL_DIFFERENTIAL: "mcq",
    TaskType.CROSS_DISEASE_COMPARISON: "text",
    TaskType.PHENOPACKETS_ONSET: "onset",
    TaskType.PHENOTYPE_ORDERING: "ordering",
    TaskType.STAGE_CONDITIONAL: "list",
    TaskType.STATIC_DRUG: "mcq",
    TaskType.STATIC_GENE: "mcq",
    TaskType.NEGATIVE_TEMPORAL: "mcq",
}

ERA_PHRASE = {
    "prenatal": "the prenatal period",
    "infancy": "infancy",
    "early_childhood": "early childhood",
    "childhood": "childhood",
    "adolescence": "adolescence",
    "adulthood": "adulthood",
    "older_adulthood": "older adulthood",
}


@dataclass(frozen=True)
class BenchmarkQuestion:
    id: str
    tier: str
    task_type: str
    prompt: str
    options: tuple[str, ...] | None
    gold: Mapping[str, Any]
    gold_source: Mapping[str, Any]
    difficulty: str
    answer_format: str

    def __post_init__(self) -> None:
        if self.answer_format == "mcq":
            if self.options is None or not 2 <= len(self.options) <= 4:
                raise DomainError(f"{self.id}: MCQ needs 2-4 options")
            if LETTERS.find(str(self.gold.get("answer"))) not in range(len(self.options)):
                raise DomainError(f"{self.id}: gold letter not among options")
        if self.tier == "tier2" and not self.gold_source.get("pmids"):
            raise DomainError(f"{self.id}: tier2 question without PMID trace")

    @property
    def answer(self) -> str:
        return str(self.gold["answer"])

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["options"] = list(self.options) if self.options is not None else None
        d["gold"] = dict(self.gold)
        d["gold_source"] = dict(self.gold_source)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BenchmarkQuestion":
        opts = data.get("options")
        return cls(
            id=data["id"], tier=data["tier"], task_type=data["task_type"], prompt=data["prompt"],
            options=tuple(opts) if opts is not None else None, gold=dict(data["gold"]),
            gold_source=dict(data["gold_source"]), difficulty=data["difficulty"],
            answer_format=data["answer_format"],
        )


@dataclass
class BenchmarkSources:
    gold: Sequence[GoldRecord] = ()
    hpoa: Sequence[GoldRecord] = ()
    phenopackets: Sequence[PhenopacketCase] = ()
    kg: TemporalKG | None = None
    schema: SchemaIndex | None = None
    table: OnsetBinTable = DEFAULT_BIN_TABLE


@dataclass
class GenerationResult:
    questions: list[BenchmarkQuestion]
    warnings: list[str] = field(default_factory=list)


def _fmt_age(x: float) -> str:
    return f"{x:g}"


def _fmt_range(r: Sequence[float]) -> str:
    return f"{_fmt_age(r[0])}-{_fmt_age(r[1])} years"


def _rng(seed: int, task: TaskType) -> random.Random:
    return random.Random(f"{seed}|{task.value}")


def _title(name: str) -> str:
    return name if any(c.isupper() for c in name) else name.title()


def _question(task: TaskType, i: int, prompt: str, options: Sequence[str] | None, gold: dict[str, Any],
              source: dict[str, Any]) -> BenchmarkQuestion:
    return BenchmarkQuestion(
        id=f"{task.value}-{i:04d}",
        tier=TIER[task],
        task_type=task.value,
        prompt=prompt,
        options=tuple(options) if options is not None else None,
        gold=gold,
        gold_source=source,
        difficulty=DIFFICULTY[task].value,
        answer_format=ANSWER_FORMAT[task],
    )


def _mcq_prompt(stem: str, options: Sequence[str]) -> str:
    return stem + " " + ", ".join(f"({LETTERS[i]}) {o}" for i, o in enumerate(options)) + "?"


def _gold_trace(g: GoldRecord) -> dict[str, Any]:
    return {"kind": g.source.value, "disease": g.disease, "disease_id": g.disease_id,
            "range": [g.onset_min, g.onset_max]}


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _inside_probe(g: GoldRecord, rng: random.Random) -> float | None:
    ints = [a for a in range(int(g.onset_min) + 1, int(g.onset_max) + 1) if g.onset_min < a < g.onset_max]
    if ints:
        return float(rng.choice(ints))
    mid = round((g.onset_min + g.onset_max) / 2, 1)
    return mid if g.onset_min < mid < g.onset_max else None


def _outside_probe(g: GoldRecord, rng: random.Random) -> float | None:
    above = [float(a) for a in range(int(g.onset_max + OUTSIDE_MARGIN + 0.999), int(g.onset_max) + 13)
             if a - g.onset_max >= OUTSIDE_MARGIN and a <= AGE_MAX]
    below = [float(a) for a in range(max(0, int(g.onset_min) - 12), int(g.onset_min) + 1)
             if g.onset_min - a >= OUTSIDE_MARGIN]
    pool = above + below
    return rng.choice(pool) if pool else None


def gen_temporal_window(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.TEMPORAL_WINDOW
    rng = _rng(seed, task)
    records = sorted(sources.gold, key=lambda g: (g.key, g.onset_min, g.onset_max))
    rng.shuffle(records)
    out: list[BenchmarkQuestion] = []
    for g in records:
        if len(out) >= n:
            break
        want_inside = len(out) % 2 == 0
        probe = _inside_probe(g, rng) if want_inside else _outside_probe(g, rng)
        if probe is None:
            continue
        prompt = (f"Is age {_fmt_age(probe)} years within the typical onset window for "
                  f"{_title(g.disease)}?")
        gold = {"answer": "Yes" if want_inside else "No", "probe": probe, "range": [g.onset_min, g.onset_max]}
        out.append(_question(task, len(out), prompt, None, gold, _gold_trace(g)))
    return _finish(task, out, n)


def _finish(task: TaskType, out: list[BenchmarkQuestion], n: int) -> GenerationResult:
    warnings = []
    if len(out) < n:
        msg = f"{task.value}: generated {len(out)} of {n} requested (insufficient eligible material)"
        logger.warning(msg)
        warnings.append(msg)
    return GenerationResult(out, warnings)


def gen_temporal_differential(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.TEMPORAL_DIFFERENTIAL
    table = sources.table
    rng = _rng(seed, task)
    records = _unique_by_disease(sources.gold)
    eras = {g.key: table.era_index(era_of_range(g.onset_min, g.onset_max, table)) for g in records}
    targets = list(records)
    rng.shuffle(targets)
    out: list[BenchmarkQuestion] = []
    for g in targets:
        if len(out) >= n:
            break
        distractors = [d for d in records if abs(eras[d.key] - eras[g.key]) >= DISTRACTOR_ERA_DISTANCE]
        if len(distractors) < 3:
            continue
        chosen = rng.sample(distractors, 3)
        options = [g] + chosen
        rng.shuffle(options)
        letter = LETTERS[options.index(g)]
        era = table.era_names[eras[g.key]]
        stem = (f"A patient presents with symptoms during {ERA_PHRASE.get(era, era)}. Based on typical age "
                f"of onset, which of the following diseases is most consistent:")
        labels = [_title(o.disease) for o in options]
        gold = {"answer": letter, "text": labels[options.index(g)], "era": era,
                "option_ranges": [[o.onset_min, o.onset_max] for o in options]}
        out.append(_question(task, len(out), _mcq_prompt(stem, labels), labels, gold, _gold_trace(g)))
    return _finish(task, out, n)


def _unique_by_disease(records: Iterable[GoldRecord]) -> list[GoldRecord]:
    seen: dict[str, GoldRecord] = {}
    for g in sorted(records, key=lambda g: (g.key, g.onset_min, g.onset_max)):
        seen.setdefault(g.key, g)
    return list(seen.values())


def gen_cross_disease(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.CROSS_DISEASE_COMPARISON
    rng = _rng(seed, task)
    records = _unique_by_disease(sources.gold)
    pairs = [(a, b) for a, b in combinations(records, 2) if not overlaps(a.onset, b.onset)]
    rng.shuffle(pairs)
    out: list[BenchmarkQuestion] = []
    for a, b in pairs[:n]:
        first, second = (a, b) if rng.random() < 0.5 else (b, a)
        earlier = a if a.onset_max < b.onset_min else b
        names = [_title(first.disease), _title(second.disease)]
        prompt = f"Which disease typically has an earlier age of onset: {names[0]} or {names[1]}?"
        gold = {"answer": _title(earlier.disease),
                "ranges": {names[0]: list(first.onset), names[1]: list(second.onset)}}
        source = {"kind": a.source.value, "records": [_gold_trace(first), _gold_trace(second)]}
        out.append(_question(task, len(out), prompt, names, gold, source))
    return _finish(task, out, n)


def gen_phenopackets_onset(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.PHENOPACKETS_ONSET
    rng = _rng(seed, task)
    groups: dict[tuple[str, str], list[PhenopacketCase]] = {}
    for c in sources.phenopackets:
        groups.setdefault((c.disease, c.phenotype), []).append(c)
    keys = sorted(groups)
    rng.shuffle(keys)
    out: list[BenchmarkQuestion] = []
    for disease, phenotype in keys[:n]:
        cases = sorted(groups[(disease, phenotype)], key=lambda c: c.case_id)
        ages = [c.onset_age for c in cases]
        rng_ = [min(ages), max(ages)]
        prompt = (f"At what age does '{phenotype}' typically present in {_title(disease)}? "
                  f"(Based on patient case data)")
        gold = {"answer": _fmt_range(rng_), "range": rng_, "n_cases": len(cases)}
        source = {"kind": "Phenopackets", "disease": disease, "phenotype": phenotype,
                  "cases": [c.case_id for c in cases]}
        out.append(_question(task, len(out), prompt, None, gold, source))
    return _finish(task, out, n)


def gen_phenotype_ordering(sources: BenchmarkSources, n: int, seed: int, k: int = 3) -> GenerationResult:
    task = TaskType.PHENOTYPE_ORDERING
    if sources.kg is None:
        return _finish(task, [], n)
    rng = _rng(seed, task)
    candidates = []
    for did in sources.kg.disease_ids:
        per = sources.kg.aggregate(did).per_phenotype
        starts = [p.onset[0] for p in per]
        # only phenotypes whose median onset is unique can be ordered
        eligible = [p for p in per if starts.count(p.onset[0]) == 1]
        if len(eligible) >= k:
            candidates.append((did, eligible))
    rng.shuffle(candidates)
    out: list[BenchmarkQuestion] = []
    for did, eligible in candidates:
        if len(out) >= n:
            break
        chosen = sorted(rng.sample(eligible, k), key=lambda p: p.onset[0])
        shown = list(chosen)
        rng.shuffle(shown)
        name = _title(sources.kg.disease_name(did))
        prompt = (f"Rank the following clinical milestones for {name} by typical age of occurrence: "
                  + ", ".join(p.phenotype for p in shown) + ".")
        pmids = sorted({pm for p in chosen for pm in p.pmids})
        gold = {"answer": " -> ".join(p.phenotype for p in chosen),
                "ordering": [p.phenotype for p in chosen], "onsets": [list(p.onset) for p in chosen]}
        source = {"kind": "ChronoKG", "disease_id": did, "pmids": pmids}
        out.append(_question(task, len(out), prompt, None, gold, source))
    return _finish(task, out, n)


def gen_stage_conditional(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.STAGE_CONDITIONAL
    if sources.kg is None:
        return _finish(task, [], n)
    rng = _rng(seed, task)
    kg = sources.kg
    pairs = [(did, stage) for did in kg.disease_ids for stage in kg.stages(did)]
    rng.shuffle(pairs)
    out: list[BenchmarkQuestion] = []
    for did, stage in pairs[:n]:
        items = kg.query_stage(did, stage)
        pmids = sorted({p for t in kg.phenotype_triples(did)
                        if normalize(t.temporal.progression_stage or "") == stage
                        for p in t.evidence.source_ids})
        if not items or not pmids:
            continue
        prompt = (f"What phenotypes are characteristic of the {stage} stage of "
                  f"{_title(kg.disease_name(did))}?")
        gold = {"answer": ", ".join(items), "items": items, "stage": stage}
        out.append(_question(task, len(out), prompt, None, gold, {"kind": "ChronoKG", "disease_id": did,
                                                                  "pmids": pmids}))
    return _finish(task, out, n)


def _static(sources: BenchmarkSources, n: int, seed: int, task: TaskType, relation: str, answer_type: str,
            stem: str) -> GenerationResult:
    schema = sources.schema
    if schema is None:
        return _finish(task, [], n)
    rng = _rng(seed, task)
    by_disease: dict[str, set[str]] = {}
    for h, r, t in sorted(schema.edges):
        if r != relation:
            continue
        ht, tt = schema.entity_types.get(h, ""), schema.entity_types.get(t, "")
        if ht == "disease" and tt == answer_type:
            by_disease.setdefault(h, set()).add(t)
        elif tt == "disease" and ht == answer_type:
            by_disease.setdefault(t, set()).add(h)
    pool = sorted({e for es in by_disease.values() for e in es})
    diseases = sorted(by_disease)
    rng.shuffle(diseases)
    out: list[BenchmarkQuestion] = []
    for d in diseases[:n]:
        correct = sorted(by_disease[d])
        wrong = [e for e in pool if e not in by_disease[d]]
        if len(wrong) < 3:
            continue
        answer = rng.choice(correct)
        options = [answer] + rng.sample(wrong, 3)
        rng.shuffle(options)
        labels = [schema.labels.get(o, o) for o in options]
        letter = LETTERS[options.index(answer)]
        prompt = _mcq_prompt(stem.format(disease=_title(schema.labels.get(d, d))), labels)
        gold = {"answer": letter, "text": labels[options.index(answer)]}
        source = {"kind": "schema", "disease_id": d, "relation": relation, "entity_id": answer}
        out.append(_question(task, len(out), prompt, labels, gold, source))
    return _finish(task, out, n)


def gen_static_drug(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    return _static(sources, n, seed, TaskType.STATIC_DRUG, "indication", "drug",
                   "Which of the following drugs is indicated for {disease}:")


def gen_static_gene(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    return _static(sources, n, seed, TaskType.STATIC_GENE, "disease_protein", "gene/protein",
                   "Which of the following genes is associated with {disease}:")


def gen_negative_temporal(sources: BenchmarkSources, n: int, seed: int) -> GenerationResult:
    task = TaskType.NEGATIVE_TEMPORAL
    rng = _rng(seed, task)
    records = _unique_by_disease(sources.hpoa or sources.gold)
    probes = sorted({float(a) for g in records for a in (g.onset_min, g.onset_max, (g.onset_min + g.onset_max) / 2)})
    rng.shuffle(probes)
    out: list[BenchmarkQuestion] = []
    for age in probes:
        if len(out) >= n:
            break
        consistent = [g for g in records if g.onset_min <= age <= g.onset_max]
        inconsistent = [g for g in records if min(abs(age - g.onset_min), abs(age - g.onset_max)) >= OUTSIDE_MARGIN
                        and not g.onset_min <= age <= g.onset_max]
        if len(consistent) < 3 or not inconsistent:
            continue
        odd = rng.choice(inconsistent)
        options = rng.sample(consistent, 3) + [odd]
        rng.shuffle(options)
        labels = [_title(o.disease) for o in options]
        stem = (f"A patient first shows symptoms at age {_fmt_age(age)} years. Based on typical age of onset, "
                f"which of the following diseases is least consistent:")
        gold = {"answer": LETTERS[options.index(odd)], "text": labels[options.index(odd)], "probe": age,
                "option_ranges": [[o.onset_min, o.onset_max] for o in options]}
        source = {"kind": odd.source.value, "records": [_gold_trace(o) for o in options]}
        out.append(_question(task, len(out), _mcq_prompt(stem, labels), labels, gold, source))
    return _finish(task, out, n)


GENERATORS = {
    TaskType.TEMPORAL_WINDOW: gen_temporal_window,
    TaskType.TEMPORAL_DIFFERENTIAL: gen_temporal_differential,
    TaskType.CROSS_DISEASE_COMPARISON: gen_cross_disease,
    TaskType.PHENOPACKETS_ONSET: gen_phenopackets_onset,
    TaskType.PHENOTYPE_ORDERING: gen_phenotype_ordering,
    TaskType.STAGE_CONDITIONAL: gen_stage_conditional,
    TaskType.STATIC_DRUG: gen_static_drug,
    TaskType.STATIC_GENE: gen_static_gene,
    TaskType.NEGATIVE_TEMPORAL: gen_negative_temporal,
}


def generate_questions(task_type: TaskType | str, sources: BenchmarkSources, n: int, seed: int = 42
                       ) -> GenerationResult:
    return GENERATORS[TaskType(task_type)](sources, n, seed)


# ---------------------------------------------------------------------------
# QC and gold verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Removal:
    question_id: str
    reason: str


def _qc_reason(q: BenchmarkQuestion, table: OnsetBinTable) -> str | None:
    task = TaskType(q.task_type)
    g = q.gold
    if q.answer_format == "mcq":
        if q.options is None or len(set(map(str.lower, q.options))) != len(q.options):
            return "duplicate-options"
    if task is TaskType.TEMPORAL_WINDOW:
        lo, hi = g["range"]
        if g["probe"] in (lo, hi):
            return "boundary-probe"
    elif task is TaskType.TEMPORAL_DIFFERENTIAL:
        consistent = [r for r in g["option_ranges"] if era_of_range(r[0], r[1], table) == g["era"]]
        if len(consistent) != 1:
            return "ambiguous-options"
    elif task is TaskType.NEGATIVE_TEMPORAL:
        bad = [r for r in g["option_ranges"] if not r[0] <= g["probe"] <= r[1]]
        if len(bad) != 1:
            return "ambiguous-options"
    elif task is TaskType.CROSS_DISEASE_COMPARISON:
        a, b = list(g["ranges"].values())
        if overlaps(tuple(a), tuple(b)):
            return "overlapping-ranges"
    elif task is TaskType.PHENOTYPE_ORDERING:
        starts = [o[0] for o in g["onsets"]]
        if any(x >= y for x, y in zip(starts, starts[1:])):
            return "tied-ordering"
    return None


def qc_questions(questions: Sequence[BenchmarkQuestion], table: OnsetBinTable = DEFAULT_BIN_TABLE
                 ) -> tuple[list[BenchmarkQuestion], list[Removal]]:
    kept, removed = [], []
    for q in questions:
        reason = _qc_reason(q, table)
        if reason is None:
            kept.append(q)
        else:
            removed.append(Removal(q.id, reason))
    return kept, removed


def verify_gold(questions: Sequence[BenchmarkQuestion], sources: BenchmarkSources) -> list[str]:
    """Re-derive each tier-1 gold from its source records; return mismatch ids."""
    gold_index = {(g.key, g.onset_min, g.onset_max): g for g in sources.gold}

    def lookup(trace: Mapping[str, Any]) -> GoldRecord | None:
        return gold_index.get((normalize_disease_name(trace["disease"]), *trace["range"]))

    mismatches = []
    for q in questions:
        if q.tier != "tier1":
            continue
        task = TaskType(q.task_type)
        ok = True
        if task is TaskType.TEMPORAL_WINDOW:
            rec = lookup(q.gold_source)
            ok = rec is not None and (q.answer == "Yes") == (rec.onset_min <= q.gold["probe"] <= rec.onset_max)
        elif task is TaskType.TEMPORAL_DIFFERENTIAL:
            rec = lookup(q.gold_source)
            ok = (rec is not None and era_of_range(rec.onset_min, rec.onset_max, sources.table) == q.gold["era"]
                  and q.options is not None and q.options[LETTERS.index(q.answer)] == _title(rec.disease))
        elif task is TaskType.CROSS_DISEASE_COMPARISON:
            recs = [lookup(t) for t in q.gold_source["records"]]
            if any(r is None for r in recs):
                ok = False
            else:
                earlier = min(recs, key=lambda r: r.onset_max)  # type: ignore[union-attr]
                ok = _title(earlier.disease) == q.answer  # type: ignore[union-attr]
        elif task is TaskType.PHENOPACKETS_ONSET:
            ids = set(q.gold_source["cases"])
            ages = [c.onset_age for c in sources.phenopackets if c.case_id in ids]
            ok = bool(ages) and [min(ages), max(ages)] == list(q.gold["range"])
        if not ok:
            mismatches.append(q.id)
    return mismatches


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


class Score(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    UNPARSEABLE = "unparseable"


_NUM = r"(\d+(?:\.\d+)?)"
_UNIT = r"(years?|yrs?|y|months?|mo)\b"
_RANGE_RE = re.compile(
    rf"(?:between\s+)?{_NUM}\s*(?:{_UNIT})?\s*(?:(?:-|–|—|to|and)\s*{_NUM}\s*(?:{_UNIT})?)?", re.IGNORECASE
)


def parse_age_range(text: str) -> tuple[float, float] | None:
    """First age or age range in ``text``, in years."""
    m = _RANGE_RE.search(text or "")
    if m is None:
        return None
    a, unit_a, b, unit_b = m.groups()
    unit = (unit_b or unit_a or "years").lower()
    scale = 1 / 12 if unit.startswith("mo") else 1.0
    lo = float(a) * (1 / 12 if (unit_a or unit).lower().startswith("mo") else 1.0)
    hi = float(b) * scale if b is not None else lo
    if hi < lo:
        lo, hi = hi, lo
    return (round(lo, 6), round(hi, 6))


def onset_tolerance(gold_range: Sequence[float]) -> float:
    return min(2.0, max(0.5, 0.5 * (gold_range[1] - gold_range[0])))


_ERA_KEYWORDS = sorted(
    [("older adulthood", "older_adulthood"), ("elderly", "older_adulthood"), ("adulthood", "adulthood"),
     ("adult", "adulthood"), ("adolescence", "adolescence"), ("adolescent", "adolescence"),
     ("early childhood", "early_childhood"), ("childhood", "childhood"), ("infancy", "infancy"),
     ("infantile", "infancy"), ("neonatal", "infancy"), ("prenatal", "prenatal"), ("congenital", "prenatal"),
     ("antenatal", "prenatal")],
    key=lambda kv: -len(kv[0]),
)


def calibrated_onset_score(predicted: tuple[float, float] | str, gold_range: Sequence[float],
                           table: OnsetBinTable = DEFAULT_BIN_TABLE) -> tuple[Score, list[str]]:
    """Overlap of the prediction with the gold range widened by the tolerance."""
    tol = onset_tolerance(gold_range)
    lo, hi = gold_range[0] - tol, gold_range[1] + tol
    diagnostics: list[str] = []
    if isinstance(predicted, str):
        parsed = parse_age_range(predicted)
        if parsed is None:
            low = predicted.lower()
            era = next((e for kw, e in _ERA_KEYWORDS if kw in low), None)
            if era is None:
                return Score.INCORRECT, ["unparseable-range"]
            e = table.era(era)
            width_ok = (e.hi - e.lo) <= (gold_range[1] - gold_range[0]) + 2 * tol
            diagnostics.append(f"era-keyword:{era}")
            ok = width_ok and e.lo <= hi and lo <= e.hi
            return (Score.CORRECT if ok else Score.INCORRECT), diagnostics
        predicted = parsed
    p_lo, p_hi = predicted
    ok = p_lo <= hi and lo <= p_hi
    return (Score.CORRECT if ok else Score.INCORRECT), diagnostics


_LETTER_RE = re.compile(r"^\s*\(?([A-Da-d])\)?(?:[).:\s]|$)")
_ORDER_SPLIT = re.compile(r"\s*(?:→|->|>|,|;|\bthen\b|\n)\s*")


def _norm_text(s: str) -> str:
    return re.sub(r"\s+", " ", re.sub(r"[^\w\s]", " ", s.lower())).strip()


def score_answer(question: BenchmarkQuestion, answer: str | None) -> Score:
    text = (answer or "").strip()
    if not text:
        return Score.UNPARSEABLE
    fmt = question.answer_format
    if fmt == "mcq":
        assert question.options is not None
        m = _LETTER_RE.match(text)
        if m and LETTERS.index(m.group(1).upper()) < len(question.options):
            return Score.CORRECT if m.group(1).upper() == question.answer else Score.INCORRECT
        for i, opt in enumerate(question.options):
            if _norm_text(opt) == _norm_text(text):
                return Score.CORRECT if LETTERS[i] == question.answer else Score.INCORRECT
        return Score.UNPARSEABLE
    if fmt == "yesno":
        word = _norm_text(text).split(" ")[0] if _norm_text(text) else ""
        if word not in ("yes", "no"):
            return Score.UNPARSEABLE
        return Score.CORRECT if word == question.answer.lower() else Score.INCORRECT
    if fmt == "text":
        a, g = _norm_text(text), _norm_text(question.answer)
        if not a:
            return Score.UNPARSEABLE
        return Score.CORRECT if (g in a or a in g) else Score.INCORRECT
    if fmt == "onset":
        score, _ = calibrated_onset_score(text, question.gold["range"])
        return score
    if fmt == "ordering":
        parts = [normalize(p) for p in _ORDER_SPLIT.split(text) if normalize(p)]
        if len(parts) < 2:
            return Score.UNPARSEABLE
        gold = [normalize(p) for p in question.gold["ordering"]]
        return Score.CORRECT if parts == gold else Score.INCORRECT
    if fmt == "list":
        low = _norm_text(text)
        return Score.CORRECT if all(_norm_text(i) in low for i in question.gold["items"]) else Score.INCORRECT
    raise DomainError(f"unknown answer format {fmt!r}")


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


BENCHMARK_FILE = "benchmark.json"
SUPPLEMENTARY_FILE = "supplementary_negative_temporal.json"


def write_benchmark(questions: Sequence[BenchmarkQuestion], out_dir: str | Path) -> list[Path]:
    """Main JSON array, per-type JSONL shards, and the supplementary file."""
    out = Path(out_dir)
    main = [q for q in questions if q.tier != "supplementary"]
    supp = [q for q in questions if q.tier == "supplementary"]
    written = []
    path = out / BENCHMARK_FILE
    atomic_write_text(path, json.dumps([q.to_dict() for q in main], indent=2, ensure_ascii=False) + "\n")
    written.append(path)
    by_type: dict[str, list[BenchmarkQuestion]] = {}
    for q in main:
        by_type.setdefault(q.task_type, []).append(q)
    for task, qs in sorted(by_type.items()):
        shard = out / "shards" / f"{task}.jsonl"
        atomic_write_text(shard, "".join(json.dumps(q.to_dict(), ensure_ascii=False) + "\n" for q in qs))
        written.append(shard)
    if supp:
        path = out / SUPPLEMENTARY_FILE
        atomic_write_text(path, json.dumps([q.to_dict() for q in supp], indent=2, ensure_ascii=False) + "\n")
        written.append(path)
    return written


def load_questions(path: str | Path) -> list[BenchmarkQuestion]:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".jsonl":
        return [BenchmarkQuestion.from_dict(json.loads(ln)) for ln in text.splitlines() if ln.strip()]
    return [BenchmarkQuestion.from_dict(d) for d in json.loads(text)]
