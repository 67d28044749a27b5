"""Record replayable model responses for the fixture corpus.

Wraps the deterministic mock extractors in ``RecordingProvider`` and runs the
construction pipeline once per fixture disease. One call (model-b on PMID
31000003) is recorded as a timeout so the replayed pipeline exercises the
tiebreaker path. A live run can be recorded the same way by swapping the mock
for ``ChatCompletionProvider``.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

from chronokg.errors import ProviderTimeout
from chronokg.extraction import MockExtractor, RecordingProvider
from chronokg.pipeline import PipelineInputs, run_disease
from chronokg.quality import JournalTiers, SchemaIndex
from chronokg.settings import load_settings
from chronokg.acquisition import FixtureDocumentSource, FixtureOntologySource

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
TIMEOUT_PMID = "31000003"


class _TimesOutOn:
    def __init__(self, inner: MockExtractor, marker: str):
        self.inner, self.name, self.marker = inner, inner.name, marker

    def complete(self, prompt: str, *, temperature: float = 0.0, timeout: float = 120.0) -> str:
        if self.marker in prompt:
            raise ProviderTimeout(f"{self.name}: simulated timeout")
        return self.inner.complete(prompt, temperature=temperature, timeout=timeout)


def main(argv: list[str]) -> int:
    settings = load_settings(FIXTURES / "config.yaml")
    replay = settings.path("replay")
    shutil.rmtree(replay, ignore_errors=True)
    marker = "Two brothers with Duchenne"
    providers = [
        RecordingProvider(MockExtractor("model-a", "plain"), replay),
        RecordingProvider(_TimesOutOn(MockExtractor("model-b", "verbose"), marker), replay),  # type: ignore[arg-type]
    ]
    tiebreaker = RecordingProvider(MockExtractor("model-c", "plain"), replay)
    inputs = PipelineInputs(
        ontology=FixtureOntologySource(FIXTURES),
        documents=FixtureDocumentSource(FIXTURES),
        providers=providers,
        schema=SchemaIndex.load(settings.path("schema")),
        config=settings.pipeline,
        tiebreaker=tiebreaker,
        journal_tiers=JournalTiers.load(settings.path("journal_tiers")),
        reference_year=settings.reference_year,
    )
    for curie in argv or sorted(p.stem.replace("_", ":", 1) for p in (FIXTURES / "ontology").glob("*.json")):
        run = run_disease(curie, inputs)
        print(curie, run.counts())
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
