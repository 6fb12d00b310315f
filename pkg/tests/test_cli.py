"""Test the command line and its exit codes.

:author: Shay Hill
:created: 2025-02-27
"""

import shutil
from pathlib import Path

import yaml
from conftest import TEST_OUTPUT, small_scenario_data
from typer.testing import CliRunner

from intralayer_sim.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, app
from intralayer_sim.event_log import read_jsonl
from intralayer_sim.globs import REFERENCE_SCENARIO
from intralayer_sim.metrics import CSV_COLUMNS
from intralayer_sim.report import EVENTS_FILE, METRICS_FILE, SUMMARY_FILE

runner = CliRunner()


def _scenario_file(name: str, **overrides: object) -> Path:
    path = TEST_OUTPUT / name
    _ = path.write_text(yaml.safe_dump(small_scenario_data(**overrides)), encoding="utf-8")
    return path


def _fresh(name: str) -> Path:
    out = TEST_OUTPUT / name
    shutil.rmtree(out, ignore_errors=True)
    return out


def _run(out: Path, *args: str):
    config = _scenario_file("cli_small.yaml")
    return runner.invoke(app, ["run", "--config", str(config), "--out", str(out), *args])


class TestValidate:
    def test_reference(self):
        result = runner.invoke(app, ["validate", "--config", str(REFERENCE_SCENARIO)])
        assert result.exit_code == EXIT_OK
        assert result.output.strip().endswith("ok")

    def test_errors_are_listed(self):
        config = _scenario_file("cli_bad_version.yaml", schema_version=2)
        result = runner.invoke(app, ["validate", "--config", str(config)])
        assert result.exit_code == EXIT_INVALID
        assert "schema_version: expected 1, got 2" in result.output

    def test_not_yaml(self):
        config = TEST_OUTPUT / "cli_broken.yaml"
        _ = config.write_text("horizon: [3\n", encoding="utf-8")
        result = runner.invoke(app, ["validate", "--config", str(config)])
        assert result.exit_code == EXIT_INVALID

    def test_not_utf8(self):
        config = TEST_OUTPUT / "cli_not_utf8.yaml"
        _ = config.write_bytes(b"seed: \xff\xff\n")
        result = runner.invoke(app, ["validate", "--config", str(config)])
        assert result.exit_code == EXIT_INVALID
        assert "not utf-8" in result.output

    def test_missing_file(self):
        missing = TEST_OUTPUT / "cli_missing.yaml"
        result = runner.invoke(app, ["validate", "--config", str(missing)])
        assert result.exit_code == EXIT_IO
        assert "no such file" in result.output


class TestRun:
    def test_prints_the_log_hash(self):
        out = _fresh("cli_run")
        result = _run(out, "--epochs", "2")
        assert result.exit_code == EXIT_OK
        printed = result.output.strip().splitlines()[-1]
        assert printed == read_jsonl(out / EVENTS_FILE).digest()
        rows = (out / METRICS_FILE).read_text(encoding="utf-8").splitlines()
        assert len(rows) == 3

    def test_seed_override(self):
        first = _run(_fresh("cli_seed_a"), "--seed", "1")
        second = _run(_fresh("cli_seed_b"), "--seed", "2")
        assert first.exit_code == second.exit_code == EXIT_OK
        assert first.output != second.output

    def test_single_format(self):
        out = _fresh("cli_csv")
        result = _run(out, "--format", "csv")
        assert result.exit_code == EXIT_OK
        assert (out / METRICS_FILE).exists()
        assert not (out / EVENTS_FILE).exists()

    def test_unknown_format(self):
        result = _run(_fresh("cli_xml"), "--format", "xml")
        assert result.exit_code == EXIT_INVALID
        assert "unknown format xml" in result.output

    def test_zero_epochs(self):
        result = _run(_fresh("cli_zero"), "--epochs", "0")
        assert result.exit_code == EXIT_INVALID


class TestReport:
    def test_stdout_matches_written_csv(self):
        out = _fresh("cli_report")
        _ = _run(out)
        result = runner.invoke(app, ["report", str(out / EVENTS_FILE)])
        assert result.exit_code == EXIT_OK
        assert result.output == (out / METRICS_FILE).read_text(encoding="utf-8")

    def test_rebuild_into_directory(self):
        out, rebuilt = _fresh("cli_source"), _fresh("cli_rebuilt")
        _ = _run(out)
        result = runner.invoke(app, ["report", str(out / EVENTS_FILE), "--out", str(rebuilt)])
        assert result.exit_code == EXIT_OK
        for name in (METRICS_FILE, SUMMARY_FILE):
            original = (out / name).read_text(encoding="utf-8")
            assert (rebuilt / name).read_text(encoding="utf-8") == original

    def test_empty_log(self):
        events = TEST_OUTPUT / "cli_empty.jsonl"
        _ = events.write_text("", encoding="utf-8")
        rebuilt = _fresh("cli_empty_report")
        result = runner.invoke(app, ["report", str(events), "--out", str(rebuilt)])
        assert result.exit_code == EXIT_OK
        text = (rebuilt / METRICS_FILE).read_text(encoding="utf-8")
        assert text == ",".join(CSV_COLUMNS) + "\n"
        assert not (rebuilt / SUMMARY_FILE).exists()

    def test_corrupt_log(self):
        events = TEST_OUTPUT / "cli_corrupt.jsonl"
        _ = events.write_text('{"epoch": 0}\n', encoding="utf-8")
        result = runner.invoke(app, ["report", str(events)])
        assert result.exit_code == EXIT_INVALID
        assert "line 1" in result.output

    def test_log_that_is_not_utf8(self):
        events = TEST_OUTPUT / "cli_not_utf8.jsonl"
        _ = events.write_bytes(b"\xff\xfe{}\n")
        result = runner.invoke(app, ["report", str(events)])
        assert result.exit_code == EXIT_INVALID
        assert "line 1" in result.output
