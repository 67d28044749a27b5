"""Command-line entry point.

Exit codes: 0 success, 1 domain failure, 2 usage or configuration error.
Errors are printed to stderr as one line, ``error[<kind>]: <message>``.
Every invocation writes a run manifest next to its outputs.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import click

from chronokg import benchmark as bench
from chronokg.acquisition import (
    EutilsDocumentSource,
    FixtureDocumentSource,
    FixtureOntologySource,
    SourceDocument,
    harvest as harvest_docs,
    profile_disease,
)
from chronokg.consensus import normalize
from chronokg.errors import ChronoKGError, ConfigError
from chronokg.evaluation import clustering, decay, rag, transe
from chronokg.extraction import ExtractionResult, extract_document
from chronokg.io import atomic_write_text, read_json, write_json
from chronokg.model import era_of_range
from chronokg.pipeline import PipelineInputs, consensus_for, run_disease, run_report, write_disease_run
from chronokg.quality import JournalTiers, SchemaIndex, qc_pipeline
from chronokg.settings import (
    RunSettings,
    judge_providers,
    load_settings,
    primary_providers,
    tiebreaker_provider,
)
from chronokg.store import KGStore, TemporalKG, TierFile, TierName, _replace_tier, load_tier, write_records
from chronokg import validation as val

logger = logging.getLogger("chronokg")


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    subcommand: str
    config_hash: str
    inputs: dict[str, str] = field(default_factory=dict)
    seeds: dict[str, Any] = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class Run:
    """Per-invocation state: settings, manifest, and output bookkeeping."""

    def __init__(self, settings: RunSettings, subcommand: str, as_json: bool):
        self.settings = settings
        self.as_json = as_json
        self.manifest = RunManifest(subcommand, settings.config_hash, started=_now())

    def input(self, key: str, path: Path | str | None) -> None:
        if path is not None:
            self.manifest.inputs[key] = str(path)

    def output(self, path: Path) -> Path:
        self.manifest.outputs.append(str(path))
        return path

    def warn(self, messages: Iterable[str]) -> None:
        # the emitting module has already logged these
        self.manifest.warnings.extend(messages)

    def finish(self, manifest_dir: Path, summary: dict[str, Any] | None = None) -> None:
        self.manifest.finished = _now()
        name = "manifest_" + self.manifest.subcommand.replace(" ", "_") + ".json"
        write_json(manifest_dir / name, self.manifest.to_dict())
        if self.as_json and summary is not None:
            click.echo(json.dumps(summary, sort_keys=True, default=_json_default))


def _json_default(obj: Any) -> Any:
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _fail(kind: str, exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"error[{kind}]: {msg}"


class _Group(click.Group):
    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(_fail("config", exc), err=True)
            ctx.exit(2)
        except (ChronoKGError, ValueError, LookupError, OSError) as exc:
            if isinstance(exc, (click.exceptions.Exit, click.ClickException)):
                raise
            kind = type(exc).__name__
            click.echo(_fail(kind, exc), err=True)
            ctx.exit(1)


def _run(ctx: click.Context, subcommand: str) -> Run:
    obj = ctx.find_root().obj
    return Run(obj["settings"], subcommand, obj["json"])


def _seed(run: Run, name: str, value: Any) -> Any:
    chosen = value if value is not None else run.settings.pipeline.seed(name)
    run.manifest.seeds[name] = chosen
    return chosen


def _ontology(settings: RunSettings) -> FixtureOntologySource:
    return FixtureOntologySource(settings.path("fixtures"))


def _document_source(settings: RunSettings):
    spec = settings.providers.get("documents") or {"kind": "fixture"}
    if spec.get("kind") == "eutils":
        import os

        key_env = spec.get("api_key_env")
        return EutilsDocumentSource(api_key=os.environ.get(key_env) if key_env else None)
    return FixtureDocumentSource(settings.path("fixtures"))


def _journal_tiers(settings: RunSettings) -> JournalTiers | None:
    p = settings.optional_path("journal_tiers")
    return JournalTiers.load(p) if p is not None and p.exists() else None


def _load_documents(path: Path) -> list[SourceDocument]:
    return [SourceDocument.from_dict(d) for d in read_json(path)]


def _load_kg(path: Path) -> TemporalKG:
    if not path.exists():
        raise ConfigError(f"input-not-found: {path}")
    return TemporalKG(load_tier(path, TierName.VALIDATED).records)


def _kg_path(run: Run, override: str | None) -> Path:
    if override is not None:
        return Path(override)
    root = run.settings.optional_path("store")
    if root is None:
        raise ConfigError("no --kg given and paths.store not configured")
    return KGStore(root).flat(TierName.VALIDATED).path


def _gold(settings: RunSettings, key: str, source: str, override: str | None) -> list[val.GoldRecord]:
    p = settings.optional_path(key, override)
    if p is None or not p.exists():
        return []
    return val.load_gold_table(p, source)


# ---------------------------------------------------------------------------
# Root group
# ---------------------------------------------------------------------------


@click.group(cls=_Group, context_settings={"show_default": True})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="YAML run config (pipeline parameters, paths, providers).")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON summary on stdout.")
@click.option("-v", "--verbose", count=True, help="More logging on stderr.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, as_json: bool, verbose: int) -> None:
    """Temporal disease knowledge graph: build, validate, benchmark, evaluate."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"settings": load_settings(config_path), "json": as_json}


# ---------------------------------------------------------------------------
# Construction stages
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--disease", required=True, help="Disease CURIE, e.g. MONDO:0010679.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Profile JSON output.")
@click.pass_context
def profile(ctx: click.Context, disease: str, out: str) -> None:
    """Resolve a disease CURIE into a profile and literature tier."""
    run = _run(ctx, "profile")
    prof = profile_disease(disease, _ontology(run.settings))
    path = run.output(write_json(Path(out), prof.to_dict()))
    run.finish(path.parent, {"disease_id": disease, "tier": prof.tier.value})


@cli.command()
@click.option("--disease", required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Documents JSON output.")
@click.option("--reference-year", type=int, default=None)
@click.pass_context
def harvest(ctx: click.Context, disease: str, out: str, reference_year: int | None) -> None:
    """Retrieve, pre-rank and cap the literature for one disease."""
    run = _run(ctx, "harvest")
    s = run.settings
    prof = profile_disease(disease, _ontology(s))
    res = harvest_docs(prof, _document_source(s), s.pipeline, s.optional_path("cache"),
                       reference_year or s.reference_year)
    run.warn(res.warnings)
    path = run.output(write_json(Path(out), [d.to_dict() for d in res.documents]))
    run.finish(path.parent, {"documents": len(res.documents), "from_cache": res.from_cache})


@cli.command()
@click.option("--disease", required=True)
@click.option("--documents", "documents_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.pass_context
def extract(ctx: click.Context, disease: str, documents_path: str, out: str) -> None:
    """Run the extraction panel over harvested documents (raw tier + per-document summary)."""
    run = _run(ctx, "extract")
    s = run.settings
    prof = profile_disease(disease, _ontology(s))
    docs = _load_documents(Path(documents_path))
    run.input("documents", documents_path)
    providers = primary_providers(s)
    results = [extract_document(d, prof, providers, s.pipeline, tiebreaker_provider(s)) for d in docs]
    out_dir = Path(out)
    raw = [t for r in results for t in r.all_triples()]
    run.output(_write_tier(out_dir / "raw.jsonl.gz", TierName.RAW, raw))
    run.output(write_json(out_dir / "extraction_summary.json", [r.summary() for r in results]))
    run.finish(out_dir, {"documents": len(results), "raw": len(raw)})


def _write_tier(path: Path, tier: TierName, records: Sequence[Any]) -> Path:
    _replace_tier(TierFile(tier, path), records)
    return path


@cli.command()
@click.option("--raw", "raw_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--summary", "summary_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Consensus tier output (.jsonl.gz).")
@click.option("--threshold", type=int, default=None, help="Minimum agreeing models [default: 2].")
@click.pass_context
def consensus(ctx: click.Context, raw_path: str, summary_path: str, out: str, threshold: int | None) -> None:
    """Cluster each document's triples across models and keep multi-model agreement."""
    run = _run(ctx, "consensus")
    cfg = run.settings.pipeline
    if threshold is not None:
        cfg = type(cfg).from_mapping({**cfg.to_dict(), "consensus_threshold": threshold})
    raw = load_tier(raw_path, TierName.RAW).records
    extractions = [ExtractionResult.from_summary(s, raw) for s in read_json(summary_path)]
    result = consensus_for(extractions, cfg)
    path = run.output(_write_tier(Path(out), TierName.CONSENSUS, result))
    run.finish(path.parent, {"raw": len(raw), "consensus": len(result)})


@cli.command()
@click.option("--disease", required=True)
@click.option("--consensus", "consensus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--documents", "documents_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.pass_context
def qc(ctx: click.Context, disease: str, consensus_path: str, documents_path: str, out: str) -> None:
    """Validate, align and score consensus triples into validated records."""
    run = _run(ctx, "qc")
    s = run.settings
    prof = profile_disease(disease, _ontology(s))
    cts = load_tier(consensus_path, TierName.CONSENSUS).records
    docs = {d.pmid: d for d in _load_documents(Path(documents_path))}
    res = qc_pipeline(cts, s.pipeline, SchemaIndex.load(s.path("schema")), documents=docs, profile=prof,
                      journal_tiers=_journal_tiers(s), reference_year=s.reference_year)
    out_dir = Path(out)
    run.output(write_records(out_dir / "validated.jsonl", res.validated))
    run.output(write_json(out_dir / "qc_report.json", res.report()))
    run.finish(out_dir, {"input": len(cts), "validated": len(res.validated), "rejected": len(res.rejected)})


@cli.group(cls=_Group)
def store() -> None:
    """Tiered JSONL store maintenance."""


@store.command("merge")
@click.option("--root", type=click.Path(file_okay=False), default=None, help="Store root [default: paths.store].")
@click.pass_context
def store_merge(ctx: click.Context, root: str | None) -> None:
    """Rebuild the flat tier files from the per-disease subtrees."""
    run = _run(ctx, "store merge")
    st = KGStore(run.settings.path("store", root))
    counts = st.merge()
    for tier in TierName:
        run.output(st.flat(tier).path)
    run.finish(st.root, counts)


@cli.group(cls=_Group)
def pipeline() -> None:
    """Chained construction."""


@pipeline.command("run")
@click.option("--disease", "diseases", multiple=True, required=True, help="Disease CURIE (repeatable).")
@click.option("--store", "store_root", type=click.Path(file_okay=False), default=None,
              help="Store root [default: paths.store].")
@click.pass_context
def pipeline_run(ctx: click.Context, diseases: tuple[str, ...], store_root: str | None) -> None:
    """profile -> harvest -> extract -> consensus -> qc -> store, per disease, then merge."""
    run = _run(ctx, "pipeline run")
    s = run.settings
    providers = primary_providers(s)
    if len(providers) < 2:
        raise ConfigError("pipeline needs at least two primary providers")
    inputs = PipelineInputs(
        ontology=_ontology(s),
        documents=_document_source(s),
        providers=providers,
        schema=SchemaIndex.load(s.path("schema")),
        config=s.pipeline,
        tiebreaker=tiebreaker_provider(s),
        journal_tiers=_journal_tiers(s),
        cache_root=s.optional_path("cache"),
        reference_year=s.reference_year,
    )
    st = KGStore(s.path("store", store_root))
    reports = []
    for disease in diseases:
        dr = run_disease(disease, inputs)
        run.warn(dr.warnings)
        for p in write_disease_run(dr, st).values():
            run.output(p)
        report = run_report(dr)
        run.output(write_json(st.disease_file(disease, TierName.VALIDATED).path.parent / "report.json", report))
        reports.append(report)
    counts = st.merge()
    run.output(st.flat(TierName.VALIDATED).path)
    run.finish(st.root, {"diseases": [r["counts"] | {"disease_id": r["disease_id"]} for r in reports],
                         "store": counts})


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@cli.group(cls=_Group)
def validate() -> None:
    """Gold-standard comparison."""


def _matched(kg: TemporalKG, gold: list[val.GoldRecord]) -> tuple[val.MatchResult, dict[str, str]]:
    names = {kg.disease_name(d): d for d in kg.disease_ids}
    return val.match_diseases(sorted(names), gold), names


def _gold_option(fn):
    fn = click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="Gold TSV [default: paths.orphadata].")(fn)
    fn = click.option("--source", type=click.Choice([s.value for s in val.GoldSource]), default="Orphadata")(fn)
    fn = click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None,
                      help="Validated JSONL [default: the store's flat file].")(fn)
    return click.option("--out", type=click.Path(dir_okay=False), required=True)(fn)


@validate.command("gold")
@_gold_option
@click.pass_context
def validate_gold(ctx: click.Context, gold_path: str | None, source: str, kg_path: str | None, out: str) -> None:
    """Containment of each matched disease's median onset range in its gold range."""
    run = _run(ctx, "validate gold")
    kg = _load_kg(_kg_path(run, kg_path))
    gold = _gold(run.settings, "orphadata", source, gold_path)
    match, names = _matched(kg, gold)
    rows = []
    for name, g in match.pairs:
        agg = kg.aggregate(names[name])
        if agg.empty:
            continue
        rows.append({"disease": name, "median_range": list(agg.median_range), "gold_range": list(g.onset),
                     "contained": val.containment(agg.median_range, g.onset)})  # type: ignore[arg-type]
    n_ok = sum(r["contained"] for r in rows)
    report = {"source": source, "matched": len(rows), "contained": n_ok,
              "strict_precision": n_ok / len(rows) if rows else None,
              "ambiguous": match.ambiguous, "unmatched": match.unmatched, "rows": rows}
    path = run.output(write_json(Path(out), report))
    run.finish(path.parent, {k: report[k] for k in ("matched", "contained", "strict_precision")})


@validate.command("taxonomy")
@_gold_option
@click.pass_context
def validate_taxonomy(ctx: click.Context, gold_path: str | None, source: str, kg_path: str | None, out: str) -> None:
    """Six-way error taxonomy and effective accuracy over matched diseases."""
    run = _run(ctx, "validate taxonomy")
    kg = _load_kg(_kg_path(run, kg_path))
    gold = _gold(run.settings, "orphadata", source, gold_path)
    match, names = _matched(kg, gold)
    verdicts, rows = [], []
    for name, g in match.pairs:
        triples = kg.phenotype_triples(names[name])
        if not any(t.temporal.has_onset for t in triples):
            continue
        v = val.classify_discrepancy(triples, g.onset, gap_years=run.settings.pipeline.conflict_gap_years)
        verdicts.append(v)
        rows.append({"disease": name, "verdict": v.value, "gold_range": list(g.onset)})
    report: dict[str, Any] = {"source": source, "rows": rows}
    if verdicts:
        report["metrics"] = val.accuracy_metrics(verdicts).to_dict()
    path = run.output(write_json(Path(out), report))
    run.finish(path.parent, report.get("metrics", {"n": 0}))


def _resource_sets(settings: RunSettings) -> dict[str, set[str]]:
    sets: dict[str, set[str]] = {}
    for key, source in (("orphadata", "Orphadata"), ("hpoa", "HPOA"), ("genereviews", "GeneReviews")):
        records = _gold(settings, key, source, None)
        if records:
            sets[source] = {g.disease for g in records}
    pp = settings.optional_path("phenopackets")
    if pp is not None and pp.exists():
        sets["Phenopackets"] = {c.disease for c in val.load_phenopackets(pp)}
    return sets


@cli.command()
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--universe", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File with one disease name per line [default: paths.universe].")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def coverage(ctx: click.Context, kg_path: str | None, universe: str | None, out: str) -> None:
    """Onset coverage per resource and the KG-only (novel) disease count."""
    run = _run(ctx, "coverage")
    kg = _load_kg(_kg_path(run, kg_path))
    onset = [kg.disease_name(d) for d in kg.disease_ids if not kg.aggregate(d).empty]
    upath = run.settings.path("universe", universe)
    names = [ln.strip() for ln in upath.read_text(encoding="utf-8").splitlines() if ln.strip()]
    table = val.coverage_gap(onset, _resource_sets(run.settings), names)
    report = table.to_dict() | {"novel_diseases": sorted(table.novel_diseases)}
    path = run.output(write_json(Path(out), report))
    run.finish(path.parent, table.to_dict())


@cli.command()
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--n", "n", type=int, default=100, show_default=True, help="Diseases to sample.")
@click.option("--seed", type=int, default=None, help="Sampling seed [default: 42].")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.pass_context
def judge(ctx: click.Context, kg_path: str | None, n: int, seed: int | None, out: str) -> None:
    """Three-judge audit of a stratified sample of KG-only diseases."""
    run = _run(ctx, "judge")
    s = run.settings
    seed = _seed(run, "sample_novel", seed)
    kg = _load_kg(_kg_path(run, kg_path))
    known = set().union(*[{val.normalize_disease_name(d) for d in ds} for ds in _resource_sets(s).values()])
    ontology = _ontology(s)
    population = []
    for did in kg.disease_ids:
        name = kg.disease_name(did)
        if val.normalize_disease_name(name) in known:
            continue
        try:
            tier = profile_disease(did, ontology).tier.value
        except ChronoKGError:
            tier = "unknown"
        population.append(val.NovelCandidate(did, name, tier, tuple(kg.phenotype_triples(did))))
    pairs, warnings = val.sample_novel(population, min(n, len(population)), seed)
    run.warn(warnings)
    judges = judge_providers(s)
    if len(judges) != 3:
        raise ConfigError(f"the audit needs exactly 3 judges, {len(judges)} configured")
    report = val.run_panel(pairs, judges)
    out_dir = Path(out)
    run.output(write_json(out_dir / "panel_report.json", report.to_dict()))
    run.output(atomic_write_text(out_dir / "panel_report.txt", report.table() + "\n"))
    run.finish(out_dir, {"n": report.n, "verified_accuracy": report.verified_accuracy})


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


def _bench_sources(s: RunSettings, kg_path: Path | None) -> bench.BenchmarkSources:
    pp = s.optional_path("phenopackets")
    schema = s.optional_path("schema")
    return bench.BenchmarkSources(
        gold=_gold(s, "orphadata", "Orphadata", None),
        hpoa=_gold(s, "hpoa", "HPOA", None),
        phenopackets=val.load_phenopackets(pp) if pp is not None and pp.exists() else (),
        kg=_load_kg(kg_path) if kg_path is not None and kg_path.exists() else None,
        schema=SchemaIndex.load(schema) if schema is not None and schema.exists() else None,
    )


@cli.group(cls=_Group)
def bench_group() -> None:
    """Temporal QA benchmark."""


bench_group.name = "bench"
cli.add_command(bench_group, "bench")


@bench_group.command("gen")
@click.option("--type", "types", multiple=True, type=click.Choice([t.value for t in bench.TaskType]),
              help="Task type (repeatable) [default: all nine].")
@click.option("--n", "n", type=int, default=10, show_default=True, help="Questions per type.")
@click.option("--seed", type=int, default=None, help="Generation seed [default: 42].")
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.pass_context
def bench_gen(ctx: click.Context, types: tuple[str, ...], n: int, seed: int | None, kg_path: str | None,
              out: str) -> None:
    """Generate, QC and write benchmark questions."""
    run = _run(ctx, "bench gen")
    seed = _seed(run, "benchmark", seed)
    kgp = Path(kg_path) if kg_path else (
        KGStore(run.settings.paths["store"]).flat(TierName.VALIDATED).path if "store" in run.settings.paths else None)
    sources = _bench_sources(run.settings, kgp)
    questions: list[bench.BenchmarkQuestion] = []
    for t in types or [t.value for t in bench.TaskType]:
        res = bench.generate_questions(t, sources, n, seed)
        run.warn(res.warnings)
        questions.extend(res.questions)
    kept, removed = bench.qc_questions(questions)
    mismatches = bench.verify_gold(kept, sources)
    out_dir = Path(out)
    for p in bench.write_benchmark(kept, out_dir):
        run.output(p)
    qc_report = {"generated": len(questions), "kept": len(kept),
                 "removed": [r.__dict__ for r in removed], "gold_mismatches": mismatches}
    run.output(write_json(out_dir / "qc_report.json", qc_report))
    run.finish(out_dir, {"kept": len(kept), "removed": len(removed), "gold_mismatches": len(mismatches)})
    if mismatches:
        raise ChronoKGError(f"{len(mismatches)} tier1 gold mismatches")


@bench_group.command("score")
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--answers", type=click.Path(exists=True, dir_okay=False), required=True,
              help='JSON object {"question id": "answer text"}.')
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def bench_score(ctx: click.Context, questions: str, answers: str, out: str) -> None:
    """Score free-form answers with the per-type rubric."""
    run = _run(ctx, "bench score")
    qs = bench.load_questions(questions)
    ans = read_json(answers)
    rows = [{"id": q.id, "task_type": q.task_type, "score": bench.score_answer(q, ans.get(q.id)).value} for q in qs]
    by_type: dict[str, list[int]] = {}
    for r in rows:
        by_type.setdefault(r["task_type"], []).append(r["score"] == "correct")
    summary = {t: sum(v) / len(v) for t, v in sorted(by_type.items())}
    path = run.output(write_json(Path(out), {"accuracy": summary, "rows": rows}))
    run.finish(path.parent, summary)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@cli.group(cls=_Group, name="rag")
def rag_group() -> None:
    """Retrieval conditions and long-tail rescue."""


def _rag_sources(s: RunSettings, kg_path: Path | None) -> rag.RagSources:
    schema = s.optional_path("schema")
    # the coarse condition sees only the era label of the HPOA onset range
    coarse = {normalize(g.disease): era_of_range(g.onset_min, g.onset_max).replace("_", " ")
              for g in _gold(s, "hpoa", "HPOA", None)}
    return rag.RagSources(
        kg=_load_kg(kg_path) if kg_path is not None and kg_path.exists() else None,
        schema=SchemaIndex.load(schema) if schema is not None and schema.exists() else None,
        coarse=coarse,
    )


@rag_group.command("run")
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--condition", type=click.Choice([c.value for c in rag.Condition]), required=True)
@click.option("--provider", "provider_name", default="mock-rag", show_default=True,
              help="Judge/answer provider name from config, or mock-rag.")
@click.option("--k", type=int, default=5, show_default=True, help="Context lines retrieved.")
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Transcript JSON.")
@click.pass_context
def rag_run(ctx: click.Context, questions: str, condition: str, provider_name: str, k: int,
            kg_path: str | None, out: str) -> None:
    """Answer questions under one retrieval condition; the full transcript is saved."""
    run = _run(ctx, "rag run")
    s = run.settings
    if provider_name == "mock-rag":
        provider: Any = rag.MockRagProvider()
    else:
        from chronokg.settings import build_provider

        specs = [p for p in (s.providers.get("answerers") or []) if p.get("name") == provider_name]
        if not specs:
            raise ConfigError(f"provider {provider_name!r} not configured under providers.answerers")
        provider = build_provider(specs[0], s)
    sources = _rag_sources(s, _kg_path(run, kg_path))
    result = rag.run_condition(bench.load_questions(questions), provider, condition, sources, k)
    path = run.output(write_json(Path(out), result.to_dict()))
    run.finish(path.parent, {"condition": condition, "accuracy": result.accuracy})


@rag_group.command("rescue")
@click.option("--nr", "nr_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--cond", "cond_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--resamples", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=None, help="Bootstrap seed [default: 42].")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def rag_rescue(ctx: click.Context, nr_path: str, cond_path: str, resamples: int, seed: int | None,
               out: str) -> None:
    """Fraction of no-retrieval failures rescued by a condition, with a bootstrap CI."""
    run = _run(ctx, "rag rescue")
    seed = _seed(run, "bootstrap", seed)
    nr = rag.ConditionResult.from_dict(read_json(nr_path))
    cond = rag.ConditionResult.from_dict(read_json(cond_path))
    res = rag.rescue_rate(nr, cond, resamples, seed)
    path = run.output(write_json(Path(out), res.to_dict() | {"condition": cond.condition, "model": cond.model}))
    run.finish(path.parent, res.to_dict())


def _lp_triples(kg: TemporalKG) -> list[transe.LPTriple]:
    out = []
    for did in kg.disease_ids:
        for t in kg.triples(did):
            out.append(transe.LPTriple(t.source_id, t.relation, t.target_id, t.temporal.onset))
    return out


@cli.command()
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--bin-mode", type=click.Choice(transe.BIN_MODES[:2]), default="fine8", show_default=True)
@click.option("--seeds", default=None, help="Comma-separated seeds [default: 42,7,123].")
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--dim", type=int, default=100, show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--batch-size", type=int, default=1024, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.pass_context
def linkpred(ctx: click.Context, kg_path: str | None, bin_mode: str, seeds: str | None, epochs: int, dim: int,
             lr: float, batch_size: int, out: str) -> None:
    """TransE ablation: plain relations vs onset-bin relations (margin 1.0)."""
    run = _run(ctx, "linkpred")
    seed_list = [int(x) for x in seeds.split(",")] if seeds else None
    seed_list = _seed(run, "linkpred", seed_list)
    lp = _lp_triples(_load_kg(_kg_path(run, kg_path)))
    params = transe.TransEParams(dim=dim, epochs=epochs, lr=lr, batch_size=batch_size)
    report = transe.ablation_run(transe.augment_temporal(lp, "none"), transe.augment_temporal(lp, bin_mode),
                                 seed_list, params=params)
    out_dir = Path(out)
    run.output(write_json(out_dir / "ablation.json", _finite(report.to_dict())))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(report.csv_rows())
    run.output(atomic_write_text(out_dir / "ablation.csv", buf.getvalue()))
    run.finish(out_dir, {"gain": report.gain, "p_value": report.p_value})


def _finite(obj: Any) -> Any:
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


@cli.command()
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--k-min", type=int, default=4, show_default=True)
@click.option("--k-max", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=None, help="K-means seed [default: 42].")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def cluster(ctx: click.Context, kg_path: str | None, k_min: int, k_max: int, seed: int | None, out: str) -> None:
    """K-means archetypes over per-disease trajectory features."""
    run = _run(ctx, "cluster")
    seed = _seed(run, "cluster", seed)
    ids, x = clustering.disease_features(_load_kg(_kg_path(run, kg_path)))
    res = clustering.cluster_trajectories(x, range(k_min, k_max + 1), seed)
    run.warn(res.warnings)
    data = res.to_dict() | {"diseases": ids, "features": list(clustering.FEATURE_NAMES), "matrix": x.tolist()}
    path = run.output(write_json(Path(out), data))
    run.finish(path.parent, {"chosen_k": res.chosen_k, "silhouettes": data["silhouettes"]})


@cli.command("decay")
@click.option("--kg", "kg_path", type=click.Path(dir_okay=False), default=None)
@click.option("--reference-year", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def decay_cmd(ctx: click.Context, kg_path: str | None, reference_year: int | None, out: str) -> None:
    """Publication-year statistics of the supporting evidence."""
    run = _run(ctx, "decay")
    kg = _load_kg(_kg_path(run, kg_path))
    triples = [t for d in kg.disease_ids for t in kg.triples(d)]
    stats = decay.evidence_age_stats(triples, reference_year or run.settings.reference_year)
    path = run.output(write_json(Path(out), stats.to_dict()))
    run.finish(path.parent, stats.to_dict())


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="chronokg", standalone_mode=True)
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
