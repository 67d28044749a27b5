"""Gold-standard comparison, error taxonomy, coverage gap, and the judge-panel audit."""

from __future__ import annotations

import csv
import json
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from chronokg.errors import DomainError, TransportError
from chronokg.model import (
    AGE_MAX,
    DEFAULT_BIN_TABLE,
    OnsetBinTable,
    TemporalTriple,
    check_age_range,
    era_of_range,
)
from chronokg.quality import range_gap
from chronokg.store import OnsetAggregate, aggregate_onset

logger = logging.getLogger(__name__)

DISEASE_SUFFIXES = ("syndrome", "disease", "disorder")
_TYPE_TOKEN_RE = re.compile(r"\btype\s+(?:[ivx]+|\d+[a-z]?)\b", re.IGNORECASE)
_TRAILING_NUMERAL_RE = re.compile(r"\s+(?:[ivx]+|\d+[a-z]?)$", re.IGNORECASE)

TIMING_KEYWORDS = (
    "age", "onset", "year", "month", "decade", "trimester", "neonatal", "infan",
    "child", "adolescen", "adult", "elderly", "congenital", "prenatal", "birth",
)

# Categorical onset labels used by gold resources, mapped onto clinical eras.
CATEGORY_TO_ERA = {
    "antenatal": "prenatal",
    "prenatal": "prenatal",
    "fetal": "prenatal",
    "congenital": "prenatal",
    "neonatal": "infancy",
    "infancy": "infancy",
    "infantile": "infancy",
    "early childhood": "early_childhood",
    "childhood": "childhood",
    "juvenile": "adolescence",
    "adolescent": "adolescence",
    "adolescence": "adolescence",
    "young adult": "adulthood",
    "adult": "adulthood",
    "adulthood": "adulthood",
    "middle age": "adulthood",
    "elderly": "older_adulthood",
    "late": "older_adulthood",
    "older adulthood": "older_adulthood",
}


class GoldSource(str, Enum):
    ORPHADATA = "Orphadata"
    HPOA = "HPOA"
    GENEREVIEWS = "GeneReviews"
    PHENOPACKETS = "Phenopackets"


class TaxonomyVerdict(str, Enum):
    CONTAINED = "Contained"
    ADJACENT_STAGE = "AdjacentStage"
    GRANULARITY_MISMATCH = "GranularityMismatch"
    WIDER_BUT_OVERLAPS = "WiderButOverlaps"
    SINGLE_TRIPLE_NOISE = "SingleTripleNoise"
    GENUINELY_WRONG = "GenuinelyWrong"


class Verdict(str, Enum):
    SUPPORTED = "supported"
    PARTIALLY_SUPPORTED = "partially_supported"
    NOT_SUPPORTED = "not_supported"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class GoldRecord:
    source: GoldSource
    disease: str
    onset_min: float
    onset_max: float
    disease_id: str | None = None
    phenotype: str | None = None

    def __post_init__(self) -> None:
        check_age_range(self.onset_min, self.onset_max)

    @property
    def key(self) -> str:
        return normalize_disease_name(self.disease)

    @property
    def onset(self) -> tuple[float, float]:
        return (self.onset_min, self.onset_max)


def normalize_disease_name(name: str) -> str:
    text = re.sub(r"[^\w\s]", " ", (name or "").lower())
    text = _TYPE_TOKEN_RE.sub(" ", text)
    text = re.sub(r"\s+", " ", text).strip()
    changed = True
    while changed:
        changed = False
        for suffix in DISEASE_SUFFIXES:
            if text.endswith(" " + suffix) or text == suffix:
                text = text[: -len(suffix)].strip()
                changed = True
        stripped = _TRAILING_NUMERAL_RE.sub("", text)
        if stripped != text and stripped:
            text, changed = stripped, True
    return text


def category_range(label: str, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> tuple[float, float]:
    """Numeric range for a categorical onset label via the clinical-era table."""
    key = re.sub(r"\s+onset$", "", label.strip().lower())
    if key in ("all ages", "all"):
        return (0.0, AGE_MAX)
    era = CATEGORY_TO_ERA.get(key)
    if era is None:
        raise DomainError(f"unknown onset category: {label!r}")
    e = table.era(era)
    return (e.lo, e.hi)


def _range_from_categories(labels: Iterable[str], table: OnsetBinTable) -> tuple[float, float]:
    ranges = [category_range(lbl, table) for lbl in labels if lbl.strip()]
    if not ranges:
        raise DomainError("no onset categories")
    return (min(r[0] for r in ranges), max(r[1] for r in ranges))


def load_gold_table(path: str | Path, source: GoldSource | str, table: OnsetBinTable = DEFAULT_BIN_TABLE
                    ) -> list[GoldRecord]:
    """Tab-separated gold rows.

    Columns: ``disease`` plus either ``onset_min``/``onset_max`` or
    ``onset_category`` (several categories separated by ``|``). Optional
    ``disease_id`` column.
    """
    source = GoldSource(source)
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader((line for line in fh if not line.startswith("#")), delimiter="\t"):
            if row.get("onset_min") not in (None, ""):
                lo, hi = float(row["onset_min"]), float(row["onset_max"])
            else:
                lo, hi = _range_from_categories(row["onset_category"].split("|"), table)
            out.append(GoldRecord(source, row["disease"], lo, hi, row.get("disease_id") or None))
    return out


@dataclass(frozen=True)
class PhenopacketCase:
    case_id: str
    disease: str
    phenotype: str
    onset_age: float


def load_phenopackets(path: str | Path) -> list[PhenopacketCase]:
    """JSON list of ``{"id", "disease", "phenotype", "onset_age"}``; ``onset_age``
    may be years or an ISO-8601 duration like ``P2Y6M``."""
    cases = []
    for item in json.loads(Path(path).read_text(encoding="utf-8")):
        cases.append(PhenopacketCase(item["id"], item["disease"], item["phenotype"], parse_age(item["onset_age"])))
    return cases


_ISO_DURATION = re.compile(r"^P(?:(\d+(?:\.\d+)?)Y)?(?:(\d+(?:\.\d+)?)M)?(?:(\d+(?:\.\d+)?)W)?(?:(\d+(?:\.\d+)?)D)?$")


def parse_age(value: Any) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    m = _ISO_DURATION.match(str(value).strip())
    if not m or not any(m.groups()):
        raise DomainError(f"unparseable age {value!r}")
    y, mo, w, d = (float(g) if g else 0.0 for g in m.groups())
    return round(y + mo / 12.0 + w * 7 / 365.25 + d / 365.25, 4)


def phenopackets_gold(cases: Sequence[PhenopacketCase]) -> list[GoldRecord]:
    """Per (disease, phenotype) min-max over case ages."""
    groups: dict[tuple[str, str], list[float]] = {}
    for c in cases:
        groups.setdefault((c.disease, c.phenotype), []).append(c.onset_age)
    return [
        GoldRecord(GoldSource.PHENOPACKETS, d, min(ages), max(ages), phenotype=p)
        for (d, p), ages in sorted(groups.items())
    ]


# ---------------------------------------------------------------------------
# Matching and containment
# ---------------------------------------------------------------------------


@dataclass
class MatchResult:
    pairs: list[tuple[str, GoldRecord]]
    ambiguous: list[str] = field(default_factory=list)
    unmatched: list[str] = field(default_factory=list)


def match_diseases(kg_disease_names: Iterable[str], gold_records: Sequence[GoldRecord]) -> MatchResult:
    """One-to-one exact match on normalised names. Keys hit by two or more
    rows on either side are reported ambiguous."""
    gold_by_key: dict[str, list[GoldRecord]] = {}
    for g in gold_records:
        gold_by_key.setdefault(g.key, []).append(g)
    kg_names = list(kg_disease_names)
    kg_by_key: dict[str, list[str]] = {}
    for n in kg_names:
        kg_by_key.setdefault(normalize_disease_name(n), []).append(n)
    result = MatchResult([])
    for name in kg_names:
        key = normalize_disease_name(name)
        golds = gold_by_key.get(key, [])
        if len(golds) > 1 or len(kg_by_key[key]) > 1:
            result.ambiguous.append(name)
        elif len(golds) == 1:
            result.pairs.append((name, golds[0]))
        else:
            result.unmatched.append(name)
    for key, golds in gold_by_key.items():
        if len(golds) > 1:
            result.ambiguous.extend(g.disease for g in golds)
    return result


def containment(kg_range: tuple[float, float], gold_range: tuple[float, float]) -> bool:
    return kg_range[0] >= gold_range[0] and kg_range[1] <= gold_range[1]


def overlaps(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _aggregate_contained(agg: OnsetAggregate, gold: tuple[float, float]) -> bool:
    # both the median and every contributing triple must sit inside gold
    return containment(agg.median_range, gold) and containment(agg.pooled_range, gold)  # type: ignore[arg-type]


def classify_discrepancy(
    triples: Sequence[TemporalTriple],
    gold_range: tuple[float, float],
    table: OnsetBinTable = DEFAULT_BIN_TABLE,
    gap_years: float = 10.0,
) -> TaxonomyVerdict:
    """Assign exactly one taxonomy category to a matched disease.

    Rules are tried in order: contained, single-triple noise (leave-one-out),
    genuinely wrong, adjacent stage, wider-but-overlaps, granularity mismatch
    (catch-all).
    """
    rows = [t for t in triples if t.temporal.has_onset]
    agg = aggregate_onset(rows)
    if agg.empty:
        raise DomainError("disease has no onset-bearing triples")
    median = agg.median_range
    assert median is not None
    if _aggregate_contained(agg, gold_range):
        return TaxonomyVerdict.CONTAINED
    if len(rows) > 1:
        for i in range(len(rows)):
            loo = aggregate_onset(rows[:i] + rows[i + 1 :])
            if _aggregate_contained(loo, gold_range):
                return TaxonomyVerdict.SINGLE_TRIPLE_NOISE
    gap = range_gap(median, gold_range)
    if not overlaps(median, gold_range) and gap > gap_years:
        return TaxonomyVerdict.GENUINELY_WRONG
    era_kg = table.era_index(era_of_range(*median, table))
    era_gold = table.era_index(era_of_range(*gold_range, table))
    if abs(era_kg - era_gold) == 1 and gap <= gap_years:
        return TaxonomyVerdict.ADJACENT_STAGE
    if containment(gold_range, median):
        return TaxonomyVerdict.WIDER_BUT_OVERLAPS
    return TaxonomyVerdict.GRANULARITY_MISMATCH


@dataclass(frozen=True)
class AccuracyMetrics:
    n: int
    strict_precision: float
    effective_accuracy: float
    fractions: Mapping[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "strict_precision": self.strict_precision,
                "effective_accuracy": self.effective_accuracy, "fractions": dict(self.fractions)}


def accuracy_metrics(verdicts: Sequence[TaxonomyVerdict]) -> AccuracyMetrics:
    if not verdicts:
        raise DomainError("no verdicts to summarise")
    counts = Counter(TaxonomyVerdict(v) for v in verdicts)
    n = len(verdicts)
    fractions = {v.value: counts.get(v, 0) / n for v in TaxonomyVerdict}
    wrong = counts.get(TaxonomyVerdict.GENUINELY_WRONG, 0)
    return AccuracyMetrics(
        n=n,
        strict_precision=counts.get(TaxonomyVerdict.CONTAINED, 0) / n,
        effective_accuracy=(n - wrong) / n,
        fractions=fractions,
    )


# ---------------------------------------------------------------------------
# Coverage gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageRow:
    resource: str
    count: int
    percent: float


@dataclass(frozen=True)
class CoverageTable:
    universe: int
    rows: tuple[CoverageRow, ...]
    novel: CoverageRow
    novel_diseases: frozenset[str]

    def to_dict(self) -> dict[str, Any]:
        return {
            "universe": self.universe,
            "rows": [r.__dict__ for r in self.rows],
            "novel": self.novel.__dict__,
        }


def _pct(count: int, universe: int) -> float:
    return round(100.0 * count / universe, 1) if universe else 0.0


def coverage_gap(
    kg_onset_diseases: Iterable[str],
    resource_sets: Mapping[str, Iterable[str]],
    universe: Iterable[str] | int,
    kg_label: str = "ChronoKG",
) -> CoverageTable:
    """Per-resource onset coverage against a disease universe, plus KG-only diseases."""
    kg = {normalize_disease_name(d) for d in kg_onset_diseases}
    sets = {name: {normalize_disease_name(d) for d in ds} for name, ds in resource_sets.items()}
    size = universe if isinstance(universe, int) else len({normalize_disease_name(d) for d in universe})
    rows = [CoverageRow(name, len(s), _pct(len(s), size)) for name, s in sets.items()]
    rows.append(CoverageRow(kg_label, len(kg), _pct(len(kg), size)))
    union: set[str] = set().union(*sets.values()) if sets else set()
    novel = kg - union
    return CoverageTable(size, tuple(rows), CoverageRow("novel", len(novel), _pct(len(novel), size)),
                         frozenset(novel))


# ---------------------------------------------------------------------------
# Novel-coverage sampling and the judge panel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NovelCandidate:
    disease_id: str
    disease_name: str
    tier: str
    triples: tuple[TemporalTriple, ...]


@dataclass(frozen=True)
class SampledPair:
    disease_id: str
    disease_name: str
    stratum: tuple[str, str]
    triple: TemporalTriple

    @property
    def claim(self) -> tuple[float, float] | None:
        return self.triple.temporal.onset

    @property
    def evidence(self) -> str:
        return self.triple.evidence.evidence_text


_CLAUSE_SPLIT = re.compile(r"[.;,:!?()]")


def keyword_span_length(text: str, keywords: Sequence[str] = TIMING_KEYWORDS) -> int:
    """Length of the longest clause of ``text`` holding a timing keyword."""
    best = 0
    for clause in _CLAUSE_SPLIT.split(text):
        low = clause.lower()
        if any(k in low for k in keywords):
            best = max(best, len(clause.strip()))
    return best


def select_triple(triples: Sequence[TemporalTriple]) -> TemporalTriple | None:
    with_onset = [t for t in triples if t.temporal.has_onset] or list(triples)
    if not with_onset:
        return None
    return max(with_onset, key=lambda t: (keyword_span_length(t.evidence.evidence_text), _neg(t.edge_id)))


def _neg(s: str) -> tuple[int, ...]:
    return tuple(-ord(c) for c in s)


def disease_era(c: NovelCandidate, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    agg = aggregate_onset(c.triples)
    if agg.empty:
        return "unknown"
    return era_of_range(*agg.median_range, table)  # type: ignore[misc]


def allocate(sizes: Mapping[Any, int], n: int) -> tuple[dict[Any, int], list[str]]:
    """Proportional allocation with largest-remainder rounding and overflow reallocation."""
    total = sum(sizes.values())
    if n > total:
        raise DomainError(f"cannot sample {n} from a population of {total}")
    warnings: list[str] = []
    keys = sorted(sizes)
    if n == 0:
        return {k: 0 for k in keys}, warnings
    quotas = {k: n * sizes[k] / total for k in keys}
    alloc = {k: int(quotas[k]) for k in keys}
    left = n - sum(alloc.values())
    for k in sorted(keys, key=lambda k: (-(quotas[k] - alloc[k]), keys.index(k)))[:left]:
        alloc[k] += 1
    # strata that cannot fill their share hand the surplus to the others
    surplus = 0
    for k in keys:
        if alloc[k] > sizes[k]:
            surplus += alloc[k] - sizes[k]
            warnings.append(f"stratum {k} short by {alloc[k] - sizes[k]}; reallocated")
            alloc[k] = sizes[k]
    while surplus:
        room = [k for k in keys if alloc[k] < sizes[k]]
        room.sort(key=lambda k: (-(sizes[k] - alloc[k]), keys.index(k)))
        alloc[room[0]] += 1
        surplus -= 1
    return alloc, warnings


def sample_novel(
    population: Sequence[NovelCandidate],
    n: int,
    seed: int = 42,
    table: OnsetBinTable = DEFAULT_BIN_TABLE,
) -> tuple[list[SampledPair], list[str]]:
    """Stratified (tier x era) sample, one (claim, evidence) pair per disease."""
    strata: dict[tuple[str, str], list[NovelCandidate]] = {}
    for c in sorted(population, key=lambda c: c.disease_id):
        strata.setdefault((c.tier, disease_era(c, table)), []).append(c)
    alloc, warnings = allocate({k: len(v) for k, v in strata.items()}, n)
    out = []
    for key in sorted(strata):
        members = list(strata[key])
        random.Random(f"{seed}|{key[0]}|{key[1]}").shuffle(members)
        for c in members[: alloc[key]]:
            chosen = select_triple(c.triples)
            if chosen is not None:
                out.append(SampledPair(c.disease_id, c.disease_name, key, chosen))
    return out, warnings


JUDGE_PROMPT = """\
You are auditing whether a quoted piece of biomedical evidence supports a
claimed age-of-onset range.

Follow these steps in order:
1. Quote the timing clause from the evidence verbatim. If there is none,
   the verdict is unverifiable.
2. Translate the clause to a numeric age range in years using this fixed
   clinical-era lookup: {era_lookup}.
3. Compare that range against the claimed range for this single triple
   (not the disease as a whole).
4. Return one verdict: supported, partially_supported, not_supported, or
   unverifiable.

Claim: {claim}
Evidence: "{evidence}"

Answer as JSON: {{"quote": "...", "evidence_range": [min, max], "verdict": "..."}}
"""


@dataclass(frozen=True)
class JudgeVerdict:
    judge: str
    verdict: Verdict
    rationale: str
    diagnostics: tuple[str, ...] = ()


def era_lookup_text(table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    parts = []
    for e in table.clinical_eras:
        label = e.name.replace("_", " ")
        parts.append(f"{label} >={e.lo:g} y" if e.hi >= AGE_MAX else f"{label} {e.lo:g}-{e.hi:g} y")
    return ", ".join(parts)


def build_judge_prompt(claim: str, evidence: str, table: OnsetBinTable = DEFAULT_BIN_TABLE) -> str:
    return JUDGE_PROMPT.format(era_lookup=era_lookup_text(table), claim=claim, evidence=evidence)


def format_claim(disease: str, phenotype: str, onset: tuple[float, float] | None) -> str:
    if onset is None:
        return f"{phenotype} in {disease}: onset not stated numerically"
    return f"{phenotype} in {disease} has onset at {onset[0]:g}-{onset[1]:g} years"


_VERDICT_RE = re.compile(r"\b(partially_supported|not_supported|unverifiable|supported)\b", re.IGNORECASE)


def parse_judge_response(text: str) -> tuple[Verdict, str, list[str]]:
    diagnostics: list[str] = []
    rationale = text.strip()
    try:
        obj = json.loads(text[text.find("{"): text.rfind("}") + 1])
        if isinstance(obj, dict) and str(obj.get("verdict", "")).lower() in {v.value for v in Verdict}:
            return Verdict(str(obj["verdict"]).lower()), str(obj.get("quote", rationale)), diagnostics
    except ValueError:
        pass
    m = _VERDICT_RE.search(text or "")
    if m:
        diagnostics.append("verdict-from-text")
        return Verdict(m.group(1).lower()), rationale, diagnostics
    diagnostics.append("unparseable-verdict")
    return Verdict.UNVERIFIABLE, rationale, diagnostics


def judge_pair(claim: str, evidence: str, judge_provider: Any, table: OnsetBinTable = DEFAULT_BIN_TABLE
               ) -> JudgeVerdict:
    """Ask one judge to rate a (claim, evidence) pair.

    Transport failures propagate as errors; only unreadable answers become
    ``unverifiable``.
    """
    prompt = build_judge_prompt(claim, evidence, table)
    text = judge_provider.complete(prompt, temperature=0.0, timeout=120.0)
    verdict, rationale, diags = parse_judge_response(text)
    return JudgeVerdict(judge_provider.name, verdict, rationale, tuple(diags))


_ERA_PHRASES = [
    ("older adulthood", "older_adulthood"), ("elderly", "older_adulthood"), ("late-onset", "older_adulthood"),
    ("late adult", "older_adulthood"), ("adulthood", "adulthood"), ("adult", "adulthood"),
    ("adolescen", "adolescence"), ("teen", "adolescence"), ("early childhood", "early_childhood"),
    ("toddler", "early_childhood"), ("childhood", "childhood"), ("child", "childhood"),
    ("infancy", "infancy"), ("infant", "infancy"), ("neonat", "infancy"), ("newborn", "infancy"),
    ("prenatal", "prenatal"), ("antenatal", "prenatal"), ("trimester", "prenatal"), ("congenital", "prenatal"),
    ("birth", "prenatal"),
]
_EVIDENCE_AGE_RE = re.compile(
    r"(?:age[sd]?\s+(?:of\s+)?|between\s+|from\s+|at\s+)(\d+(?:\.\d+)?)(?:\s*(?:-|–|to|and)\s*(\d+(?:\.\d+)?))?\s*(years?|months?|y\b)",
    re.IGNORECASE,
)
_CLAIM_RE = re.compile(r"onset at (\d+(?:\.\d+)?)-(\d+(?:\.\d+)?) years")


class MockJudge:
    """Rule-based judge that follows the four-step protocol literally."""

    def __init__(self, name: str = "mock-judge", table: OnsetBinTable = DEFAULT_BIN_TABLE, tolerance: float = 1.0):
        self.name = name
        self.table = table
        self.tolerance = tolerance

    def evidence_range(self, evidence: str) -> tuple[str, tuple[float, float]] | None:
        m = _EVIDENCE_AGE_RE.search(evidence)
        if m:
            lo = float(m.group(1))
            hi = float(m.group(2)) if m.group(2) else lo
            if m.group(3).lower().startswith("month"):
                lo, hi = lo / 12, hi / 12
            return m.group(0), (lo, hi)
        low = evidence.lower()
        for phrase, era in _ERA_PHRASES:
            if phrase in low:
                e = self.table.era(era)
                return phrase, (e.lo, e.hi)
        return None

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        claim_line = next((ln for ln in prompt.splitlines() if ln.startswith("Claim: ")), "")
        ev_line = next((ln for ln in prompt.splitlines() if ln.startswith("Evidence: ")), "")
        evidence = ev_line[len('Evidence: "'):-1] if ev_line.endswith('"') else ev_line
        found = self.evidence_range(evidence)
        if found is None:
            return json.dumps({"quote": "", "evidence_range": None, "verdict": "unverifiable"})
        quote, (lo, hi) = found
        m = _CLAIM_RE.search(claim_line)
        if m is None:
            verdict = Verdict.NOT_SUPPORTED
        else:
            c_lo, c_hi = float(m.group(1)), float(m.group(2))
            tol = self.tolerance
            if c_lo >= lo - tol and c_hi <= hi + tol:
                verdict = Verdict.SUPPORTED
            elif c_lo <= hi + tol and lo - tol <= c_hi:
                verdict = Verdict.PARTIALLY_SUPPORTED
            else:
                verdict = Verdict.NOT_SUPPORTED
        return json.dumps({"quote": quote, "evidence_range": [lo, hi], "verdict": verdict.value})


@dataclass
class PanelReport:
    n: int
    majority_counts: dict[str, int]
    splits: int
    unanimous: int
    two_of_three: int
    verified_accuracy: float | None
    per_judge: dict[str, dict[str, int]]
    excluded: list[str] = field(default_factory=list)
    items: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return self.__dict__.copy()

    def table(self) -> str:
        judges = sorted(self.per_judge)
        lines = ["verdict".ljust(22) + "".join(j[:14].rjust(16) for j in judges) + "majority".rjust(10)]
        for v in Verdict:
            lines.append(v.value.ljust(22) + "".join(str(self.per_judge[j].get(v.value, 0)).rjust(16) for j in judges)
                         + str(self.majority_counts.get(v.value, 0)).rjust(10))
        lines.append("three-way split".ljust(22) + "".rjust(16 * len(judges)) + str(self.splits).rjust(10))
        acc = "n/a" if self.verified_accuracy is None else f"{100 * self.verified_accuracy:.1f}%"
        lines.append(f"agreement: {self.unanimous} unanimous, {self.two_of_three} two-of-three, {self.splits} split")
        lines.append(f"verified accuracy: {acc}")
        return "\n".join(lines)


def aggregate_verdicts(items: Mapping[str, Sequence[JudgeVerdict]], n_judges: int = 3) -> PanelReport:
    """Majority vote per item and the verified-accuracy summary."""
    majority: Counter[str] = Counter()
    per_judge: dict[str, Counter[str]] = {}
    splits = unanimous = two = 0
    excluded: list[str] = []
    rows = []
    for item_id in sorted(items):
        verdicts = list(items[item_id])
        if len(verdicts) != n_judges:
            logger.warning("item %s has %d verdicts, expected %d; excluded", item_id, len(verdicts), n_judges)
            excluded.append(item_id)
            continue
        for jv in verdicts:
            per_judge.setdefault(jv.judge, Counter())[jv.verdict.value] += 1
        counts = Counter(jv.verdict.value for jv in verdicts)
        top, votes = counts.most_common(1)[0]
        if votes * 2 > n_judges:
            majority[top] += 1
            if votes == n_judges:
                unanimous += 1
            else:
                two += 1
            decided = top
        else:
            splits += 1
            decided = "split"
        rows.append({"item": item_id, "majority": decided, "votes": {jv.judge: jv.verdict.value for jv in verdicts}})
    n = len(rows)
    verifiable = n - majority[Verdict.UNVERIFIABLE.value] - splits
    good = majority[Verdict.SUPPORTED.value] + majority[Verdict.PARTIALLY_SUPPORTED.value]
    return PanelReport(
        n=n,
        majority_counts={v.value: majority.get(v.value, 0) for v in Verdict},
        splits=splits,
        unanimous=unanimous,
        two_of_three=two,
        verified_accuracy=good / verifiable if verifiable else None,
        per_judge={j: dict(c) for j, c in sorted(per_judge.items())},
        excluded=excluded,
        items=rows,
    )


def run_panel(pairs: Sequence[SampledPair], judges: Sequence[Any], table: OnsetBinTable = DEFAULT_BIN_TABLE
              ) -> PanelReport:
    items: dict[str, list[JudgeVerdict]] = {}
    for pair in pairs:
        claim = format_claim(pair.disease_name, pair.triple.target_name, pair.claim)
        verdicts = []
        for judge in judges:
            try:
                verdicts.append(judge_pair(claim, pair.evidence, judge, table))
            except TransportError as exc:
                logger.warning("judge %s failed on %s: %s", judge.name, pair.disease_id, exc)
        items[pair.disease_id] = verdicts
    return aggregate_verdicts(items, n_judges=len(judges))
