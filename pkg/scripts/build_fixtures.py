"""Regenerate the small offline fixture corpus under ``fixtures/``.

Three diseases, one per literature tier, with abstracts written in the
sentence shapes the mock extractor understands. Run from the repo root::

    python scripts/build_fixtures.py && python scripts/record_responses.py
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1] / "fixtures"

DISEASES = {
    "MONDO:0010679": {
        "name": "Duchenne muscular dystrophy",
        "synonyms": ["Duchenne dystrophy"],
        "differential_diseases": ["Becker muscular dystrophy", "limb-girdle muscular dystrophy"],
        "known_genes": ["DMD"],
        "known_phenotypes": ["Gowers sign", "calf pseudohypertrophy"],
        "category": "neuromuscular",
        "inheritance_pattern": "X-linked recessive",
        "pubmed_count": 5200,
        "pmc_fulltext_available": True,
    },
    "MONDO:0010311": {
        "name": "Becker muscular dystrophy",
        "synonyms": [],
        "differential_diseases": ["Duchenne muscular dystrophy"],
        "known_genes": ["DMD"],
        "known_phenotypes": ["cardiomyopathy"],
        "category": "neuromuscular",
        "inheritance_pattern": "X-linked recessive",
        "pubmed_count": 64,
    },
    "MONDO:0012850": {
        "name": "Kleefstra syndrome",
        "synonyms": [],
        "differential_diseases": [],
        "known_genes": ["EHMT1"],
        "known_phenotypes": ["intellectual disability"],
        "category": "neurodevelopmental",
        "inheritance_pattern": "autosomal dominant",
        "pubmed_count": 11,
    },
}

DOCUMENTS = [
    # Duchenne: four abstracts with overlapping but not identical ranges
    {
        "pmid": "31000001", "year": 2019, "journal": "Neurology", "types": ["Review"],
        "title": "Natural history of Duchenne muscular dystrophy",
        "text": (
            "Duchenne muscular dystrophy is caused by pathogenic variants in DMD. "
            "Walking delay typically presents between 2 and 5 years during the early ambulatory stage. "
            "Gowers sign appears between 5 and 8 years. "
            "Loss of ambulation occurs between 8 and 12 years (milestone: loss of ambulation) "
            "during the late ambulatory stage."
        ),
    },
    {
        "pmid": "31000002", "year": 2021, "journal": "Lancet Neurology", "types": ["Cohort Study"],
        "title": "Cardiac and respiratory decline in Duchenne muscular dystrophy",
        "text": (
            "Cardiomyopathy develops between 10 and 18 years during the non-ambulatory stage. "
            "Respiratory insufficiency develops between 12 and 20 years. "
            "Loss of ambulation occurs between 9 and 13 years (milestone: loss of ambulation)."
        ),
    },
    {
        "pmid": "31000003", "year": 2004, "journal": "Muscle and Nerve", "types": ["Case Reports"],
        "title": "A Duchenne muscular dystrophy family",
        "text": (
            "Two brothers with Duchenne muscular dystrophy were evaluated. "
            "Walking delay presents between 3 and 5 years. "
            "Gowers sign appears between 4 and 7 years."
        ),
    },
    {
        "pmid": "31000004", "year": 2023, "journal": "Orphanet Journal of Rare Diseases",
        "types": ["Journal Article"],
        "title": "Diagnostic pathways in Duchenne muscular dystrophy",
        "text": (
            "Diagnosis of Duchenne muscular dystrophy relies on creatine kinase and genetic testing. "
            "Duchenne muscular dystrophy is caused by mutations in DMD."
        ),
    },
    # Becker: two abstracts
    {
        "pmid": "32000001", "year": 2018, "journal": "Neurology", "types": ["Cohort Study"],
        "title": "Cardiac involvement in Becker muscular dystrophy",
        "text": (
            "Cardiomyopathy develops between 20 and 40 years during the adult stage. "
            "Becker muscular dystrophy is caused by pathogenic variants in DMD."
        ),
    },
    {
        "pmid": "32000002", "year": 2015, "journal": "Journal of Neurology", "types": ["Case Series"],
        "title": "Muscle cramps in Becker muscular dystrophy",
        "text": (
            "Exercise-induced cramps typically begins between 5 and 15 years. "
            "Cardiomyopathy develops between 22 and 38 years during the adult stage."
        ),
    },
    # Kleefstra: a single abstract
    {
        "pmid": "33000001", "year": 2012, "journal": "European Journal of Human Genetics",
        "types": ["Case Reports"],
        "title": "Kleefstra syndrome in a toddler",
        "text": (
            "Kleefstra syndrome is caused by pathogenic variants in EHMT1. "
            "Hypotonia presents between 0 and 1 years. "
            "Speech delay presents between 2 and 4 years."
        ),
    },
]

SCHEMA_ROWS = [
    ("head_id", "head_type", "relation", "tail_id", "tail_type", "head_name", "tail_name"),
    ("MONDO_0010679", "disease", "disease_protein", "GENE_DMD", "gene/protein",
     "Duchenne muscular dystrophy", "DMD"),
    ("MONDO_0010311", "disease", "disease_protein", "GENE_DMD", "gene/protein",
     "Becker muscular dystrophy", "DMD"),
    ("MONDO_0012850", "disease", "disease_protein", "GENE_EHMT1", "gene/protein", "Kleefstra syndrome", "EHMT1"),
    ("MONDO_0010679", "disease", "disease_phenotype_positive", "HP_0003391", "phenotype",
     "Duchenne muscular dystrophy", "Gowers sign"),
    ("MONDO_0010311", "disease", "disease_phenotype_positive", "HP_0001638", "phenotype",
     "Becker muscular dystrophy", "cardiomyopathy"),
    ("DB00635", "drug", "indication", "MONDO_0010679", "disease", "prednisone", "Duchenne muscular dystrophy"),
    ("DB11656", "drug", "indication", "MONDO_0010679", "disease", "deflazacort", "Duchenne muscular dystrophy"),
    ("MONDO_0010726", "disease", "disease_protein", "GENE_MECP2", "gene/protein", "Rett syndrome", "MECP2"),
    ("MONDO_0010526", "disease", "disease_protein", "GENE_GLA", "gene/protein", "Fabry disease", "GLA"),
    ("MONDO_0009290", "disease", "disease_protein", "GENE_GAA", "gene/protein", "Pompe disease", "GAA"),
    ("MONDO_0010200", "disease", "disease_protein", "GENE_ATP7B", "gene/protein", "Wilson disease", "ATP7B"),
    ("MONDO_0010520", "disease", "disease_protein", "GENE_COL4A5", "gene/protein", "Alport syndrome", "COL4A5"),
    ("DB00103", "drug", "indication", "MONDO_0010526", "disease", "agalsidase beta", "Fabry disease"),
    ("DB01272", "drug", "indication", "MONDO_0009290", "disease", "alglucosidase alfa", "Pompe disease"),
    ("DB00859", "drug", "indication", "MONDO_0010200", "disease", "penicillamine", "Wilson disease"),
    ("DB01593", "drug", "indication", "MONDO_0010200", "disease", "zinc acetate", "Wilson disease"),
]

JOURNAL_TIERS = [
    ("journal", "tier"),
    ("Lancet Neurology", "1"),
    ("Neurology", "1"),
    ("Muscle and Nerve", "2"),
    ("Journal of Neurology", "2"),
    ("European Journal of Human Genetics", "2"),
    ("Orphanet Journal of Rare Diseases", "3"),
]

ORPHADATA = [
    ("disease", "disease_id", "onset_category"),
    ("Duchenne muscular dystrophy", "ORPHA:98896", "Childhood"),
    ("Becker muscular dystrophy", "ORPHA:98895", "Childhood|Adolescent|Adult"),
    ("Kleefstra syndrome", "ORPHA:96147", "Infancy|Neonatal"),
    ("Rett syndrome", "ORPHA:778", "Infancy"),
    ("Fabry disease", "ORPHA:324", "Childhood|Adolescent"),
    ("Pompe disease", "ORPHA:365", "Infancy|Childhood|Adult"),
    ("Wilson disease", "ORPHA:905", "Adolescent"),
    ("Alport syndrome", "ORPHA:63", "Childhood"),
]

HPOA = [
    ("disease", "disease_id", "onset_min", "onset_max"),
    ("Duchenne muscular dystrophy", "OMIM:310200", "1", "5"),
    ("Becker muscular dystrophy", "OMIM:300376", "5", "40"),
    ("Rett syndrome", "OMIM:312750", "0.5", "1.5"),
    ("Fabry disease", "OMIM:301500", "3", "10"),
    ("Wilson disease", "OMIM:277900", "5", "35"),
    ("Alport syndrome", "OMIM:301050", "2", "12"),
    ("Kleefstra syndrome", "OMIM:610253", "0", "1"),
]

PHENOPACKETS = [
    {"id": "PP-0001", "disease": "Duchenne muscular dystrophy", "phenotype": "Gowers sign", "onset_age": "P5Y"},
    {"id": "PP-0002", "disease": "Duchenne muscular dystrophy", "phenotype": "Gowers sign", "onset_age": "P6Y6M"},
    {"id": "PP-0003", "disease": "Duchenne muscular dystrophy", "phenotype": "Gowers sign", "onset_age": 7},
    {"id": "PP-0004", "disease": "Kleefstra syndrome", "phenotype": "Hypotonia", "onset_age": "P3M"},
    {"id": "PP-0005", "disease": "Kleefstra syndrome", "phenotype": "Hypotonia", "onset_age": "P10M"},
]

UNIVERSE = [
    "Duchenne muscular dystrophy", "Becker muscular dystrophy", "Kleefstra syndrome", "Rett syndrome",
    "Fabry disease", "Pompe disease", "Alport syndrome", "Wilson disease",
]

CONFIG = """\
# Offline run over the fixture corpus with recorded model responses.
pipeline:
  consensus_threshold: 2
  fuzzy_threshold: 80
  extraction_date: "2026-01-15"
paths:
  fixtures: .
  replay: replay
  schema: schema_snapshot.tsv
  journal_tiers: journal_tiers.tsv
  orphadata: gold/orphadata.tsv
  hpoa: gold/hpoa.tsv
  phenopackets: gold/phenopackets.json
  universe: gold/universe.txt
  store: ../out/store
providers:
  documents: {kind: fixture}
  primary:
    - {name: model-a, kind: replay}
    - {name: model-b, kind: replay}
  tiebreaker: {name: model-c, kind: replay}
  judges:
    - {name: judge-1, kind: mock-judge}
    - {name: judge-2, kind: mock-judge}
    - {name: judge-3, kind: mock-judge}
reference_year: 2026
"""


def _tsv(path: Path, rows: list[tuple[str, ...]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")


def _json(path: Path, obj: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def main() -> None:
    for curie, record in DISEASES.items():
        _json(ROOT / "ontology" / f"{curie.replace(':', '_')}.json", record)
    for d in DOCUMENTS:
        _json(ROOT / "documents" / f"{d['pmid']}.json", {
            "pmid": d["pmid"], "title": d["title"], "text": d["text"], "publication_year": d["year"],
            "journal": d["journal"], "publication_types": d["types"],
        })
    _tsv(ROOT / "schema_snapshot.tsv", SCHEMA_ROWS)
    _tsv(ROOT / "journal_tiers.tsv", JOURNAL_TIERS)
    _tsv(ROOT / "gold" / "orphadata.tsv", ORPHADATA)
    _tsv(ROOT / "gold" / "hpoa.tsv", HPOA)
    _json(ROOT / "gold" / "phenopackets.json", PHENOPACKETS)
    (ROOT / "gold" / "universe.txt").write_text("\n".join(UNIVERSE) + "\n", encoding="utf-8")
    (ROOT / "config.yaml").write_text(CONFIG, encoding="utf-8")


if __name__ == "__main__":
    main()
