"""Tests for SweepRunner and SweepReport."""

from __future__ import annotations

import csv
import io
import json
import math

import pytest

from qkdfk.finitekey import EntropyPath, KeyRateResult
from qkdfk.pipeline import PathEvaluation, PointStatus
from qkdfk.sweep import runner
from qkdfk.sweep.config import SweepConfig
from qkdfk.sweep.runner import (
    CSV_COLUMNS,
    SweepReport,
    SweepRunner,
    protocol_parameters,
    run_sweep,
)


def _make_config(protocol: dict, sweep: dict | None = None, **sections) -> SweepConfig:
    data = {"protocol": protocol, "sweep": sweep or {}}
    data.update(sections)
    return SweepConfig.from_dict(data)


def _fake_evaluate(instance, N, path, settings=None):
    """Rate 1 − Q (times a bump in p_z), no solver involved."""
    p_z = instance.parameters.get("p_z", 0.5)
    rate = (1.0 - instance.key_error_q) * (1.0 - (p_z - 0.6) ** 2)
    if EntropyPath(path) is EntropyPath.MIN_ENTROPY:
        rate /= 2
    ell = None if math.isinf(N) else int(rate * N)
    return PathEvaluation(
        result=KeyRateResult(ell=ell, rate=rate, path=EntropyPath(path), N=N),
        entropy_term=rate / instance.p_pass,
    )


@pytest.fixture
def fake_pipeline(monkeypatch):
    monkeypatch.setattr(runner, "evaluate_path", _fake_evaluate)


class TestProtocolParameters:
    def test_q_axis_maps_to_flip(self):
        cfg = _make_config({"name": "bb84", "p_z": 0.7}, {"Q": [0.04]})
        assert protocol_parameters(cfg, {"Q": 0.04}) == {"p_z": 0.7, "p_depol": 0.02}

    def test_loss_axis_maps_to_amplitude(self):
        cfg = _make_config({"name": "twin_field"}, {"loss_db": [20.0]})
        params = protocol_parameters(cfg, {"loss_db": 20.0})
        assert params["sqrt_eta"] == pytest.approx(0.1)


class TestSweepRunner:
    async def test_rows_in_grid_order(self, fake_pipeline):
        cfg = _make_config({"name": "bb84"}, {"Q": [0.0, 0.02, 0.04], "N": [1e6, "inf"]})
        report = await SweepRunner(cfg, workers=3).run()
        assert len(report.rows) == 3 * 2 * 2
        assert [r.index for r in report.rows] == sorted(r.index for r in report.rows)
        assert [r.Q for r in report.rows[::4]] == pytest.approx([0.0, 0.02, 0.04])
        assert not report.failures

    async def test_best_is_max_over_paths(self, fake_pipeline):
        cfg = _make_config({"name": "bb84"}, {"Q": [0.02]})
        report = await SweepRunner(cfg).run()
        vn, mn = report.rows
        assert vn.path == "von-neumann" and mn.path == "min-entropy"
        assert vn.best == mn.best == pytest.approx(vn.rate)

    async def test_progress_callback(self, fake_pipeline):
        cfg = _make_config({"name": "bb84"}, {"Q": [0.0, 0.02]})
        events = []
        await SweepRunner(cfg).run(on_progress=lambda **kw: events.append(kw))
        assert [e["current"] for e in events] == [1, 2]
        assert all(e["total"] == 2 and e["status"] == "completed" for e in events)

    async def test_build_failure_becomes_error_row(self, fake_pipeline):
        cfg = _make_config({"name": "twin_field", "q": 1.0}, security={"paths": "vn"})
        report = await SweepRunner(cfg).run()
        (row,) = report.rows
        assert row.status == PointStatus.ERROR.value
        assert not row.certified
        assert "never heralds" in row.reason
        assert report.failures == [row]

    async def test_optimizer_moves_parameter(self, fake_pipeline):
        cfg = _make_config(
            {"name": "bb84"},
            {"optimize": {"parameter": "p_z", "bounds": [0.1, 0.9], "tol": 1e-6}},
            security={"paths": "vn"},
        )
        report = await SweepRunner(cfg).run()
        (row,) = report.rows
        assert row.parameters["p_z"] == pytest.approx(0.6, abs=1e-3)

    async def test_both_heralds_are_summed(self, fake_pipeline):
        cfg = _make_config(
            {"name": "twin_field", "tf_both_heralds": True},
            {"loss_db": [10.0]},
            security={"paths": "vn"},
        )
        report = await SweepRunner(cfg).run()
        (row,) = report.rows
        single = _make_config({"name": "twin_field"}, {"loss_db": [10.0]}, security={"paths": "vn"})
        one = (await SweepRunner(single).run()).rows[0]
        assert row.rate == pytest.approx(2 * one.rate)
        assert row.p_pass == pytest.approx(2 * one.p_pass)
        assert row.plob == pytest.approx(-math.log2(1 - 0.1))
        assert row.loss_db == 10.0

    async def test_real_pipeline_point(self):
        cfg = _make_config({"name": "bb84"}, {"Q": [0.02]}, security={"paths": "min"})
        report = await SweepRunner(cfg).run()
        (row,) = report.rows
        assert row.status == "ok"
        assert 0.0 < row.rate < 0.5


class TestSweepReport:
    async def _report(self) -> SweepReport:
        cfg = _make_config({"name": "bb84"}, {"Q": [0.01], "N": [1e6, "inf"]})
        return await SweepRunner(cfg).run()

    async def test_csv(self, fake_pipeline):
        report = await self._report()
        rows = list(csv.DictReader(io.StringIO(report.to_csv())))
        assert len(rows) == 4
        assert list(rows[0])[: len(CSV_COLUMNS)] == list(CSV_COLUMNS)
        assert rows[2]["N"] == "inf"
        assert rows[2]["ell"] == ""
        assert "wall_time_s" in rows[0]

    async def test_csv_without_timing(self, fake_pipeline):
        report = await self._report()
        header = report.to_csv(timing=False).splitlines()[0]
        assert "wall_time_s" not in header

    async def test_json(self, fake_pipeline):
        report = await self._report()
        data = json.loads(report.to_json())
        assert data["protocol"] == "bb84"
        assert data["failures"] == 0
        assert data["rows"][2]["N"] == "inf"

    async def test_table(self, fake_pipeline):
        table = (await self._report()).table()
        assert "von-neumann" in table
        assert "status" in table.splitlines()[0]

    async def test_write(self, fake_pipeline, tmp_path):
        report = await self._report()
        out = report.write(tmp_path / "nested" / "rates.json", fmt="json")
        assert json.loads(out.read_text())["protocol"] == "bb84"


class TestRunSweep:
    async def test_writes_config_output(self, fake_pipeline, tmp_path):
        cfg = _make_config(
            {"name": "bb84"}, {"Q": [0.01]}, output={"path": str(tmp_path / "out.csv")}
        )
        report = await run_sweep(cfg)
        assert (tmp_path / "out.csv").read_text().startswith("protocol,N,")
        assert len(report.rows) == 2

    async def test_explicit_output_wins(self, fake_pipeline, tmp_path):
        cfg = _make_config({"name": "bb84"}, {"Q": [0.01]})
        await run_sweep(cfg, out=tmp_path / "rates.json", fmt="json")
        assert json.loads((tmp_path / "rates.json").read_text())["rows"]
