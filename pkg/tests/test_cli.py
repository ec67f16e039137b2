"""Tests for the CLI module."""

from __future__ import annotations

import json
import math

import pytest

import qkdfk
from qkdfk.cli import EXIT_CONFIG_ERROR, EXIT_SOLVER_FAILURE, main
from qkdfk.finitekey import EntropyPath, KeyRateResult
from qkdfk.pipeline import PathEvaluation
from qkdfk.sweep import runner


def _fake_evaluate(instance, N, path, settings=None):
    rate = 0.5 * (1.0 - instance.key_error_q)
    return PathEvaluation(
        result=KeyRateResult(
            ell=None if math.isinf(N) else int(rate * N), rate=rate, path=EntropyPath(path), N=N
        ),
        entropy_term=rate,
    )


@pytest.fixture
def fake_pipeline(monkeypatch):
    monkeypatch.setattr(runner, "evaluate_path", _fake_evaluate)


def _write_config(tmp_path, body: str):
    path = tmp_path / "sweep.toml"
    path.write_text(body)
    return path


BB84_CONFIG = """
[protocol]
name = "bb84"

[sweep]
N = [1e6, "inf"]
Q = [0.01, 0.02]
"""


class TestMainNoArgs:
    def test_no_args_prints_help(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 0
        assert "qkdfk" in capsys.readouterr().out


class TestVersion:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])
        assert exc_info.value.code == 0
        assert qkdfk.__version__ in capsys.readouterr().out


class TestProtocols:
    def test_text_listing(self, capsys):
        main(["protocols"])
        out = capsys.readouterr().out
        assert "bb84:" in out
        assert "twin_field:" in out
        assert "options: granularity" in out

    def test_json_listing(self, capsys):
        main(["protocols", "--json"])
        data = json.loads(capsys.readouterr().out)
        assert [p["name"] for p in data] == [
            "b92",
            "bb84",
            "bb84_mismatch",
            "trojan_bb84",
            "twin_field",
        ]


class TestRun:
    def test_missing_config_arg(self):
        with pytest.raises(SystemExit):
            main(["run"])

    def test_csv_to_stdout(self, tmp_path, capsys, fake_pipeline):
        path = _write_config(tmp_path, BB84_CONFIG)
        main(["run", str(path), "--no-timing"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("protocol,N,loss_db")
        assert "wall_time_s" not in lines[0]
        assert len(lines) == 1 + 2 * 2 * 2

    def test_json_with_path_override(self, tmp_path, capsys, fake_pipeline):
        path = _write_config(tmp_path, BB84_CONFIG)
        main(["run", str(path), "--format", "json", "--paths", "min"])
        data = json.loads(capsys.readouterr().out)
        assert {r["path"] for r in data["rows"]} == {"min-entropy"}
        assert len(data["rows"]) == 4

    def test_output_file(self, tmp_path, capsys, fake_pipeline):
        path = _write_config(tmp_path, BB84_CONFIG)
        out = tmp_path / "rates.csv"
        main(["run", str(path), "-o", str(out), "--workers", "1"])
        assert "Written 8 rows" in capsys.readouterr().out
        assert out.read_text().startswith("protocol,")

    def test_config_error(self, tmp_path, capsys):
        path = _write_config(tmp_path, '[protocol]\nname = "e91"\n')
        with pytest.raises(SystemExit) as exc_info:
            main(["run", str(path)])
        assert exc_info.value.code == EXIT_CONFIG_ERROR
        assert "config error: [protocol] name" in capsys.readouterr().err

    def test_bad_paths_flag(self, tmp_path, capsys):
        path = _write_config(tmp_path, BB84_CONFIG)
        with pytest.raises(SystemExit) as exc_info:
            main(["run", str(path), "--paths", "renyi"])
        assert exc_info.value.code == EXIT_CONFIG_ERROR

    def test_missing_file(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["run", str(tmp_path / "none.toml")])
        assert exc_info.value.code == EXIT_CONFIG_ERROR

    def test_failures_reported(self, tmp_path, capsys, fake_pipeline):
        path = _write_config(tmp_path, '[protocol]\nname = "twin_field"\nq = 1.0\n')
        main(["run", str(path)])
        assert "not certified" in capsys.readouterr().err

    def test_strict_exit_code(self, tmp_path, capsys, fake_pipeline):
        path = _write_config(tmp_path, '[protocol]\nname = "twin_field"\nq = 1.0\n')
        with pytest.raises(SystemExit) as exc_info:
            main(["run", str(path), "--strict"])
        assert exc_info.value.code == EXIT_SOLVER_FAILURE


class TestCheck:
    def test_subset_passes(self, capsys):
        main(["check", "finitekey.deviation", "finitekey.coherent"])
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "2/2 passed" in out

    def test_json(self, capsys):
        main(["check", "--json", "sdp.scalar"])
        (result,) = json.loads(capsys.readouterr().out)
        assert result["name"] == "sdp.scalar"
        assert result["passed"] is True

    def test_failure_exit_code(self, capsys, monkeypatch):
        from qkdfk import selftest

        monkeypatch.setattr(
            selftest, "CHECKS", [("broken", lambda: (1.0, 0.0, "off by one"), 1e-9)]
        )
        with pytest.raises(SystemExit) as exc_info:
            main(["check"])
        assert exc_info.value.code == 1
        assert "FAIL" in capsys.readouterr().out
