from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, strategies as st

from helpers import FIXTURES

from chronokg.acquisition import FixtureDocumentSource, FixtureOntologySource, SourceDocument, profile_disease
from chronokg.errors import CacheMissError, DomainError, ProviderTimeout, TransportError
from chronokg.extraction import (TEMPORAL_HEADER, ChatCompletionProvider, MockExtractor, RawTriple,
                                 RecordingProvider, ReplayProvider, build_primary_prompt, build_temporal_prompt,
                                 extract_document, parse_extraction_response, should_invoke_tiebreaker)
from chronokg.model import PipelineConfig

GOOD = {"triples": [{"subject": "DMD", "relation": "has_phenotype", "object": "cardiomyopathy",
                     "confidence": "HIGH", "evidence_text": "x" * 400,
                     "temporal_context": {"onset_age_min": 10, "onset_age_max": 18}}]}


@pytest.fixture
def duchenne():
    onto = FixtureOntologySource(FIXTURES)
    return profile_disease("MONDO:0010679", onto)


@pytest.fixture
def doc():
    return FixtureDocumentSource(FIXTURES).fetch(["31000001"])[0]


def test_parse_strict():
    triples, diags = parse_extraction_response(json.dumps(GOOD), model="m", pmid="1")
    [t] = triples
    assert diags == []
    assert t.confidence == "high" and len(t.evidence_text) == 300
    assert t.temporal_context.onset == (10, 18) and t.model == "m" and t.pmid == "1"


@pytest.mark.parametrize("text,step", [
    ("```json\n" + json.dumps(GOOD) + "\n```", "repaired:strip-fences"),
    ("Here you go: " + json.dumps(GOOD) + " done", "repaired:outer-braces"),
    ('{"triples": [{"subject": "a", "relation": "r", "object": "b",},]}', "repaired:trailing-commas"),
])
def test_parse_repairs(text, step):
    triples, diags = parse_extraction_response(text)
    assert len(triples) == 1 and step in diags


def test_parse_drops_incomplete_triples():
    text = json.dumps({"triples": [{"subject": "a", "relation": "r"}, "junk",
                                   {"subject": "a", "relation": "r", "object": "b", "confidence": "sure"}]})
    triples, diags = parse_extraction_response(text)
    assert [t.confidence for t in triples] == ["low"]
    assert "dropped[0]:missing-object" in diags and "dropped[1]:not-an-object" in diags


@given(st.one_of(st.text(), st.binary(), st.none(), st.integers(), st.lists(st.integers())))
def test_parse_never_raises(value):
    triples, diags = parse_extraction_response(value)
    assert isinstance(triples, list) and isinstance(diags, list)


def test_parse_failure_reported():
    assert parse_extraction_response("not json at all") == ([], ["parse-failure"])


def test_tiebreaker_rule():
    assert should_invoke_tiebreaker([0, 3])
    assert not should_invoke_tiebreaker([2, 3])
    with pytest.raises(DomainError):
        should_invoke_tiebreaker([1])


def test_prompts(duchenne, doc):
    p = build_primary_prompt(duchenne, doc)
    assert duchenne.name in p and doc.text in p
    assert build_temporal_prompt(doc, duchenne).startswith(TEMPORAL_HEADER)
    assert "—" not in TEMPORAL_HEADER


def test_raw_triple_round_trip():
    [t], _ = parse_extraction_response(json.dumps(GOOD), model="m", pmid="1", publication_year=2000)
    assert RawTriple.from_dict(json.loads(json.dumps(t.to_dict()))) == t


def test_replay_and_recording(tmp_path):
    rec = RecordingProvider(MockExtractor("m1"), tmp_path)
    answer = rec.complete("Disease: X\nX is caused by mutations in ABC.")
    replay = ReplayProvider("m1", tmp_path)
    assert replay.complete("Disease: X\nX is caused by mutations in ABC.") == answer
    with pytest.raises(CacheMissError):
        replay.complete("another prompt")
    replay.path_for("t").parent.mkdir(parents=True, exist_ok=True)
    replay.path_for("t").write_text(json.dumps({"error": "timeout"}))
    with pytest.raises(ProviderTimeout):
        replay.complete("t")


class _Fixed:
    def __init__(self, name, response=None, exc=None):
        self.name, self.response, self.exc, self.prompts = name, response, exc, []

    def complete(self, prompt, *, temperature=0.0, timeout=120.0):
        self.prompts.append(prompt)
        if self.exc:
            raise self.exc
        return self.response


def test_extract_invokes_tiebreaker_on_empty_model(duchenne, doc):
    a = MockExtractor("a")
    b = _Fixed("b", '{"triples": []}')
    c = MockExtractor("c")
    res = extract_document(doc, duchenne, [a, b], PipelineConfig(), tiebreaker=c)
    assert res.tiebreaker_invoked
    assert res.models_processed == ["a", "b", "c"] and res.total_models == 3


def test_timeout_excludes_model_from_denominator(duchenne, doc):
    res = extract_document(doc, duchenne, [MockExtractor("a"), _Fixed("b", exc=ProviderTimeout("slow"))],
                           PipelineConfig())
    assert res.models_processed == ["a"] and "b:timeout" in res.diagnostics


def test_second_pass_runs_without_temporal_triples(duchenne):
    doc = SourceDocument("9", "t", "Duchenne muscular dystrophy is caused by mutations in DMD.")
    a, b = MockExtractor("a"), MockExtractor("b")
    res = extract_document(doc, duchenne, [a, b], PipelineConfig())
    assert res.second_pass


def test_extract_requires_two_unique_providers(duchenne, doc):
    with pytest.raises(DomainError):
        extract_document(doc, duchenne, [MockExtractor("a")], PipelineConfig())
    with pytest.raises(DomainError):
        extract_document(doc, duchenne, [MockExtractor("a"), MockExtractor("a")], PipelineConfig())


def _chat(handler, monkeypatch, key="secret"):
    if key:
        monkeypatch.setenv("TEST_KEY", key)
    else:
        monkeypatch.delenv("TEST_KEY", raising=False)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return ChatCompletionProvider("live", "model-x", "https://example.test/v1/", "TEST_KEY", client=client)


def test_chat_provider_success(monkeypatch):
    def handler(request):
        body = json.loads(request.content)
        assert request.url.path == "/v1/chat/completions"
        assert request.headers["authorization"] == "Bearer secret"
        assert body["temperature"] == 0.0 and body["model"] == "model-x"
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    assert _chat(handler, monkeypatch).complete("hi") == "ok"


def test_chat_provider_errors(monkeypatch):
    with pytest.raises(TransportError):
        _chat(lambda r: httpx.Response(200), monkeypatch, key=None).complete("hi")
    with pytest.raises(TransportError):
        _chat(lambda r: httpx.Response(500), monkeypatch).complete("hi")
    with pytest.raises(TransportError):
        _chat(lambda r: httpx.Response(200, json={"choices": []}), monkeypatch).complete("hi")

    def slow(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(ProviderTimeout):
        _chat(slow, monkeypatch).complete("hi")
