"""Tests for sweep configuration loading and validation."""

from __future__ import annotations

import math
from pathlib import Path

import pytest

from qkdfk.finitekey import AttackModel, EntropyPath
from qkdfk.relent import StepOneMethod
from qkdfk.sweep.config import ConfigError, SolverSettings, SweepConfig, parse_paths


def _config(**sections):
    data = {"protocol": {"name": "bb84"}}
    data.update(sections)
    return SweepConfig.from_dict(data)


class TestSolverSettings:
    def test_defaults(self):
        settings = SolverSettings()
        assert settings.workers == 4
        assert settings.step_one is StepOneMethod.AUTO

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("QKDFK_SOLVER_TOL", "1e-9")
        monkeypatch.setenv("QKDFK_WORKERS", "2")
        monkeypatch.setenv("QKDFK_STEP_ONE", "frank-wolfe")
        settings = SolverSettings.from_env()
        assert settings.tol == 1e-9
        assert settings.workers == 2
        assert settings.step_one is StepOneMethod.FRANK_WOLFE

    def test_from_env_bad_number(self, monkeypatch):
        monkeypatch.setenv("QKDFK_QRE_M", "four")
        with pytest.raises(ConfigError, match="environment"):
            SolverSettings.from_env()

    def test_bad_step_one(self):
        with pytest.raises(ConfigError, match=r"\[solver\] step_one"):
            SolverSettings(step_one="newton")

    def test_bad_workers(self):
        with pytest.raises(ConfigError, match="workers"):
            SolverSettings(workers=0)

    def test_qre_config(self):
        cfg = SolverSettings(qre_m=3, qre_k=2, tol=1e-7).qre_config()
        assert (cfg.m, cfg.k, cfg.solver_tol) == (3, 2, 1e-7)

    def test_qre_config_rejects_bad_values(self):
        with pytest.raises(ConfigError, match=r"\[solver\]"):
            SolverSettings(qre_m=0).qre_config()


class TestFromDict:
    def test_minimal(self):
        cfg = _config()
        assert cfg.protocol == "bb84"
        assert cfg.n_grid == (math.inf,)
        assert cfg.paths == (EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY)
        assert cfg.attack_model is AttackModel.COLLECTIVE

    def test_log_spaced_n_range(self):
        cfg = _config(sweep={"N": {"start": 1e6, "stop": 1e8, "num": 3}})
        assert cfg.n_grid == (1e6, 1e7, 1e8)

    def test_n_list_with_infinity(self):
        cfg = _config(sweep={"N": [1e6, "inf"]})
        assert cfg.n_grid == (1e6, math.inf)

    def test_linear_axis(self):
        cfg = _config(sweep={"Q": {"start": 0.0, "stop": 0.1, "num": 3}})
        assert cfg.axes["Q"] == pytest.approx((0.0, 0.05, 0.1))

    def test_grid_order(self):
        cfg = _config(sweep={"Q": [0.01, 0.02], "N": [1e6, 1e7]})
        assert cfg.grid() == [
            ({"Q": 0.01}, 1e6),
            ({"Q": 0.01}, 1e7),
            ({"Q": 0.02}, 1e6),
            ({"Q": 0.02}, 1e7),
        ]

    def test_security_section(self):
        cfg = _config(security={"eps_sec": 1e-8, "paths": "min", "attack_model": "coherent"})
        assert cfg.eps_sec == 1e-8
        assert cfg.paths == (EntropyPath.MIN_ENTROPY,)
        assert cfg.attack_model is AttackModel.COHERENT
        assert cfg.pipeline_settings().eps_sec == 1e-8

    def test_optimize(self):
        cfg = _config(sweep={"optimize": {"parameter": "p_z", "bounds": [0.1, 0.9]}})
        assert cfg.optimize is not None
        assert (cfg.optimize.lower, cfg.optimize.upper) == (0.1, 0.9)

    def test_with_overrides(self):
        cfg = _config().with_overrides(output_format="json", output_path=None)
        assert cfg.output_format == "json"
        assert cfg.output_path is None

    @pytest.mark.parametrize(
        "data, match",
        [
            ({"protocol": {"name": "bb84"}, "extras": {}}, "unknown section"),
            ({"protocol": {}}, r"\[protocol\] name: missing"),
            ({"protocol": {"name": "e91"}}, "Unknown protocol 'e91'"),
            ({"protocol": {"name": "bb84", "theta": 1.0}}, "not a parameter of bb84"),
            ({"protocol": {"name": "bb84", "p_depol": 0.4}}, r"\[protocol\] p_depol"),
            ({"protocol": {"name": "b92"}, "sweep": {"Q": [0.01]}}, "Q axis"),
            ({"protocol": {"name": "bb84"}, "sweep": {"loss_db": [10]}}, "loss axis"),
            ({"protocol": {"name": "bb84"}, "sweep": {"N": [0.5]}}, "transmissions must be"),
            ({"protocol": {"name": "bb84"}, "sweep": {"N": []}}, "grid is empty"),
            ({"protocol": {"name": "bb84"}, "security": {"eps_sec": 2.0}}, r"\[security\] eps_sec"),
            ({"protocol": {"name": "bb84"}, "security": {"f_ec": 0.5}}, "f_ec"),
            ({"protocol": {"name": "bb84"}, "security": {"paths": ["qre"]}}, "unknown path"),
            ({"protocol": {"name": "bb84"}, "solver": {"tolerance": 1}}, "unknown field"),
            ({"protocol": {"name": "bb84"}, "solver": {"workers": 1.5}}, "expected an integer"),
            ({"protocol": {"name": "bb84"}, "output": {"format": "xml"}}, r"\[output\] format"),
            (
                {"protocol": {"name": "bb84", "tf_both_heralds": True}},
                "only applies to twin_field",
            ),
            (
                {
                    "protocol": {"name": "bb84"},
                    "sweep": {"p_z": [0.5], "optimize": {"parameter": "p_z", "bounds": [0, 1]}},
                },
                "both swept and optimized",
            ),
        ],
    )
    def test_invalid(self, data, match):
        with pytest.raises(ConfigError, match=match):
            SweepConfig.from_dict(data)


class TestLoad:
    def test_load_toml(self, tmp_path):
        path = tmp_path / "bb84.toml"
        path.write_text(
            "[protocol]\n"
            'name = "bb84"\n'
            "p_z = 0.6\n"
            "\n"
            "[sweep]\n"
            "N = { start = 1e6, stop = 1e10, num = 5 }\n"
            "Q = [0.01, 0.03]\n"
            "\n"
            "[output]\n"
            'path = "out/rates.csv"\n'
        )
        cfg = SweepConfig.load(path)
        assert cfg.fixed == {"p_z": 0.6}
        assert len(cfg.n_grid) == 5
        assert cfg.output_path == tmp_path / "out" / "rates.csv"
        assert len(cfg.grid()) == 10

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[protocol\nname = ")
        with pytest.raises(ConfigError, match="invalid TOML"):
            SweepConfig.load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            SweepConfig.load(tmp_path / "missing.toml")

    def test_shipped_configs_load(self):
        configs = sorted((Path(__file__).parents[2] / "configs").glob("*.toml"))
        assert configs
        for path in configs:
            SweepConfig.load(path)


class TestParsePaths:
    @pytest.mark.parametrize(
        "raw, expected",
        [
            ("both", (EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY)),
            ("min,vn", (EntropyPath.MIN_ENTROPY, EntropyPath.VON_NEUMANN)),
            (["vn", "von-neumann"], (EntropyPath.VON_NEUMANN,)),
        ],
    )
    def test_aliases(self, raw, expected):
        assert parse_paths(raw) == expected

    def test_empty(self):
        with pytest.raises(ConfigError, match="no entropy path"):
            parse_paths([])
