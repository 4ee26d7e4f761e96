"""qnmlab CLI through click's CliRunner."""

import json

import pytest
from click.testing import CliRunner

from cli import cli


@pytest.fixture
def runner():
    return CliRunner()


def verdict_lines(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


# ── Registry commands ──────────────────────────────────────────────────────────

class TestRegistry:

    def test_list(self, runner):
        result = runner.invoke(cli, ["list"])
        assert result.exit_code == 0
        assert "qotp-malleable" in result.output
        assert "gyz-implies-dns" in result.output

    def test_list_json(self, runner):
        result = runner.invoke(cli, ["list", "--json"])
        rows = json.loads(result.output)
        assert {"experiment", "claim"} <= set(rows[0])

    def test_describe(self, runner):
        result = runner.invoke(cli, ["describe", "qotp-malleable", "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output)["seeded"] is False

    def test_describe_unknown(self, runner):
        result = runner.invoke(cli, ["describe", "nm-3design"])
        assert result.exit_code == 3
        assert "UnknownExperimentError [experiment]" in result.output


# ── run ────────────────────────────────────────────────────────────────────────

class TestRun:

    def test_run_to_stdout(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", write_config(tmp_path, {"experiment": "qotp-malleable"})])
        assert result.exit_code == 0, result.output
        records = verdict_lines(result.output)
        assert len(records) == 1
        assert records[0]["pass"] is True

    def test_run_to_file(self, runner, tmp_path):
        out = tmp_path / "verdicts.jsonl"
        config = write_config(tmp_path, [{"experiment": "qotp-malleable"}, {"experiment": "injection-separation"}])
        result = runner.invoke(cli, ["run", config, "-o", str(out)])
        assert result.exit_code == 0, result.output
        records = verdict_lines(out.read_text(encoding="utf-8"))
        assert [r["experiment"] for r in records] == ["injection-separation", "qotp-malleable"]
        assert verdict_lines(result.output) == []

    def test_failed_check_exits_1(self, runner, tmp_path):
        config = write_config(tmp_path, {"experiment": "qotp-malleable", "tolerances": {"gain_floor": 5.0}})
        result = runner.invoke(cli, ["run", config])
        assert result.exit_code == 1
        assert verdict_lines(result.output)[0]["pass"] is False

    def test_malformed_config(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[{", encoding="utf-8")
        result = runner.invoke(cli, ["run", str(path)])
        assert result.exit_code == 2
        assert "ConfigError [config]" in result.output

    def test_unknown_field(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", write_config(tmp_path, {"experiment": "qotp-malleable", "sede": 1})])
        assert result.exit_code == 2
        assert "[sede]" in result.output

    def test_unknown_experiment(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", write_config(tmp_path, {"experiment": "nm-3design", "seed": 1})])
        assert result.exit_code == 3

    def test_incompatible_scheme(self, runner, tmp_path):
        doc = {"experiment": "qotp-malleable", "scheme": {"kind": "identity", "dim": 3}}
        result = runner.invoke(cli, ["run", write_config(tmp_path, doc)])
        assert result.exit_code == 4

    def test_missing_seed(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", write_config(tmp_path, {"experiment": "nm-2design"})])
        assert result.exit_code == 2
        assert "[seed]" in result.output
