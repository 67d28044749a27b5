"""Run configuration file: pipeline parameters, data paths, and provider wiring.

The file is YAML with four optional top-level sections::

    pipeline:        # PipelineConfig fields
      consensus_threshold: 2
    paths:           # relative paths resolve against the config file's directory
      fixtures: fixtures
      replay: fixtures/replay
      schema: fixtures/schema_snapshot.tsv
    providers:
      primary:
        - {name: model-a, kind: replay}
      tiebreaker: {name: model-c, kind: replay}
      judges: [...]
    reference_year: 2026

Secrets never go in the file; live providers name an environment variable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from chronokg.errors import ConfigError
from chronokg.extraction import ChatCompletionProvider, MockExtractor, ModelProvider, ReplayProvider
from chronokg.model import PipelineConfig
from chronokg.validation import MockJudge

KNOWN_SECTIONS = {"pipeline", "paths", "providers", "reference_year"}


@dataclass(frozen=True)
class RunSettings:
    pipeline: PipelineConfig
    paths: Mapping[str, Path]
    providers: Mapping[str, Any]
    reference_year: int
    config_hash: str
    source: Path | None = None
    raw: Mapping[str, Any] = field(default_factory=dict)

    def path(self, key: str, override: str | Path | None = None) -> Path:
        if override is not None:
            return Path(override)
        if key not in self.paths:
            raise ConfigError(f"path '{key}' is not configured")
        return self.paths[key]

    def optional_path(self, key: str, override: str | Path | None = None) -> Path | None:
        if override is not None:
            return Path(override)
        return self.paths.get(key)


def load_settings(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> RunSettings:
    """Read and validate a config file; ``None`` gives the built-in defaults."""
    if path is None:
        text, base, src = "", Path.cwd(), None
    else:
        src = Path(path)
        if not src.is_file():
            raise ConfigError(f"config-not-found: {src}")
        text, base = src.read_text(encoding="utf-8"), src.resolve().parent
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    pipeline_data = dict(data.get("pipeline") or {})
    pipeline_data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        pipeline = PipelineConfig.from_mapping(pipeline_data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid pipeline config: {exc}") from exc
    paths = {k: (base / v) for k, v in (data.get("paths") or {}).items() if v is not None}
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    return RunSettings(
        pipeline=pipeline,
        paths=paths,
        providers=data.get("providers") or {},
        reference_year=int(data.get("reference_year", 2026)),
        config_hash=digest,
        source=src,
        raw=data,
    )


def build_provider(spec: Mapping[str, Any], settings: RunSettings) -> ModelProvider:
    """Instantiate one provider from its ``{name, kind, ...}`` spec."""
    try:
        name, kind = spec["name"], spec.get("kind", "replay")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad provider spec: {spec!r}") from exc
    if kind == "replay":
        return ReplayProvider(name, settings.path("replay", spec.get("root")))
    if kind == "mock":
        return MockExtractor(name, style=spec.get("style", "plain"), limit=int(spec.get("limit", 2)),
                             drop_temporal=bool(spec.get("drop_temporal", False)))
    if kind == "mock-judge":
        return MockJudge(name)  # type: ignore[return-value]
    if kind == "live":
        try:
            return ChatCompletionProvider(name, spec["model"], spec["base_url"], spec["api_key_env"])
        except KeyError as exc:
            raise ConfigError(f"live provider {name} needs {exc}") from exc
    raise ConfigError(f"unknown provider kind {kind!r}")


def primary_providers(settings: RunSettings) -> list[ModelProvider]:
    specs = settings.providers.get("primary") or []
    return [build_provider(s, settings) for s in specs]


def tiebreaker_provider(settings: RunSettings) -> ModelProvider | None:
    spec = settings.providers.get("tiebreaker")
    return build_provider(spec, settings) if spec else None


def judge_providers(settings: RunSettings) -> list[ModelProvider]:
    specs = settings.providers.get("judges") or []
    return [build_provider(s, settings) for s in specs]
