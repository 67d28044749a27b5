from __future__ import annotations

import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import CONFIG, FIXTURE_DISEASES  # noqa: E402

from chronokg.cli import cli  # noqa: E402


def run_cli(*args: str, config: Path | None = CONFIG):
    runner = CliRunner()
    argv = (["--config", str(config)] if config is not None else []) + list(args)
    return runner.invoke(cli, argv, catch_exceptions=False)


@pytest.fixture(scope="session")
def fixture_store(tmp_path_factory) -> Path:
    """A store built once from the three fixture diseases with replayed responses."""
    root = tmp_path_factory.mktemp("store")
    argv = ["pipeline", "run", "--store", str(root)]
    for d in FIXTURE_DISEASES:
        argv += ["--disease", d]
    result = run_cli(*argv)
    assert result.exit_code == 0, result.output
    return root


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            props = dict(getattr(rep, "user_properties", []))
            if "acceptance" in props:
                lines.append((props["acceptance"], "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for title, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {title}")
