"""Tests for the key-rate pipeline."""

from __future__ import annotations

import math

import pytest

from qkdfk import pipeline
from qkdfk.finitekey import AttackModel, EntropyPath
from qkdfk.pipeline import (
    PipelineSettings,
    PointStatus,
    analytic_key_rate,
    best_rate,
    evaluate,
    evaluate_path,
    worst_case_error,
)
from qkdfk.protocols import b92, bb84
from qkdfk.protocols.base import HMIN, KEYTERM_VN
from qkdfk.sdp.problem import SolverError, SolveStatus


def _broken_solver(status: SolveStatus | None):
    def broken(*args, **kwargs):
        raise SolverError("solver gave up", status=status)

    return broken


class TestSettings:
    def test_profile_counts_statistical_constraints(self):
        inst = bb84(p_depol=0.01)
        profile = PipelineSettings().profile(inst, EntropyPath.VON_NEUMANN)
        assert profile.n_pe == 2
        assert profile.shares == 7

    def test_budget_uses_instance_pass_probability(self):
        budget = PipelineSettings(alpha_pe=0.2).budget(bb84(), 1e6)
        assert budget.p_pass == pytest.approx(0.5)
        assert budget.m == 100000

    def test_rejects_small_f_ec(self):
        with pytest.raises(ValueError, match="f_ec"):
            PipelineSettings(f_ec=0.8)

    def test_attack_model_from_string(self):
        assert PipelineSettings(attack_model="coherent").attack_model is AttackModel.COHERENT


class TestPointStatus:
    def test_certified(self):
        assert PointStatus.OK.certified
        assert PointStatus.FALLBACK.certified
        assert PointStatus.NO_SAMPLES.certified
        assert not PointStatus.NUMERICAL_FAILURE.certified
        assert not PointStatus.INFEASIBLE.certified


class TestEvaluatePath:
    def test_asymptotic_noiseless_bb84(self):
        ev = evaluate_path(bb84(), math.inf, EntropyPath.VON_NEUMANN)
        assert ev.status is PointStatus.OK
        assert ev.result.ell is None
        assert ev.result.rate == pytest.approx(0.45, abs=1e-3)

    def test_asymptotic_matches_closed_form(self):
        inst = bb84(p_depol=0.025)
        ev = evaluate_path(inst, math.inf, "von-neumann")
        expected = analytic_key_rate(inst, math.inf, "von-neumann").rate
        assert ev.result.rate <= expected + 1e-6
        assert ev.result.rate == pytest.approx(expected, abs=1e-3)

    def test_finite_size_lowers_rate(self):
        inst = bb84(p_depol=0.01)
        asym = evaluate_path(inst, math.inf, EntropyPath.MIN_ENTROPY)
        finite = evaluate_path(inst, 1e8, EntropyPath.MIN_ENTROPY)
        assert finite.result.ell is not None
        assert finite.result.rate < asym.result.rate

    def test_no_samples(self):
        ev = evaluate_path(bb84(), 5, EntropyPath.VON_NEUMANN)
        assert ev.status is PointStatus.NO_SAMPLES
        assert ev.result.rate == 0.0
        assert ev.result.ell == 0
        assert ev.certified

    @pytest.mark.parametrize(
        "status, expected",
        [
            (SolveStatus.INFEASIBLE, PointStatus.INFEASIBLE),
            (SolveStatus.NUMERICAL_FAILURE, PointStatus.NUMERICAL_FAILURE),
            (None, PointStatus.NUMERICAL_FAILURE),
        ],
    )
    def test_solver_failure_is_reported(self, monkeypatch, status, expected):
        monkeypatch.setattr(pipeline, "certified_minent", _broken_solver(status))
        ev = evaluate_path(bb84(p_depol=0.01), 1e8, EntropyPath.MIN_ENTROPY)
        assert ev.status is expected
        assert ev.result.rate == 0.0
        assert "solver gave up" in ev.reason
        assert not ev.certified

    def test_coherent_attacks(self):
        settings = PipelineSettings(attack_model=AttackModel.COHERENT)
        ev = evaluate_path(bb84(p_depol=0.01), 1e10, EntropyPath.MIN_ENTROPY, settings)
        collective = evaluate_path(bb84(p_depol=0.01), 1e10, EntropyPath.MIN_ENTROPY)
        assert ev.result.attack_model is AttackModel.COHERENT
        assert ev.result.rate < collective.result.rate

    def test_dump_dir(self, tmp_path):
        settings = PipelineSettings(dump_dir=tmp_path / "sdps")
        evaluate_path(bb84(p_depol=0.01), 1e8, EntropyPath.MIN_ENTROPY, settings)
        files = list((tmp_path / "sdps").glob("*.dat-s"))
        assert len(files) == 1
        assert files[0].name.startswith("bb84_min-entropy_N=1e+08")

    def test_to_dict(self):
        d = evaluate_path(bb84(), 5, EntropyPath.MIN_ENTROPY).to_dict()
        assert d["status"] == "no-samples"
        assert d["certified"] is True
        assert d["path"] == "min-entropy"


class TestEvaluate:
    def test_both_paths(self):
        results = evaluate(bb84(p_depol=0.01), math.inf)
        assert set(results) == {EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY}
        # the von Neumann path is the tighter one for BB84
        assert best_rate(results) == results[EntropyPath.VON_NEUMANN].result.rate

    def test_best_rate_skips_failures(self, monkeypatch):
        monkeypatch.setattr(pipeline, "certified_minent", _broken_solver(None))
        results = evaluate(bb84(p_depol=0.01), 1e8, paths=("min-entropy",))
        assert best_rate(results) == 0.0


class TestAnalytic:
    def test_worst_case_error(self):
        inst = bb84(p_depol=0.025)
        assert worst_case_error(inst, math.inf, 1e-10) == pytest.approx(0.05)
        assert worst_case_error(inst, 1e6, 2e-10) > 0.05
        assert worst_case_error(inst, 10, 1e-10) == 0.5

    def test_asymptotic_noiseless(self):
        assert analytic_key_rate(bb84(), math.inf, "von-neumann").rate == pytest.approx(0.45)

    @pytest.mark.parametrize("q", [0.076, 0.09, 0.12])
    def test_min_entropy_threshold(self, q):
        inst = bb84(p_depol=q / 2)
        assert analytic_key_rate(inst, math.inf, EntropyPath.MIN_ENTROPY).rate == 0.0

    def test_min_entropy_below_threshold(self):
        inst = bb84(p_depol=0.01)
        assert analytic_key_rate(inst, math.inf, EntropyPath.MIN_ENTROPY).rate > 0.0

    def test_uses_closed_forms(self):
        inst = bb84(p_depol=0.01)
        assert KEYTERM_VN in inst.reference
        assert HMIN in inst.reference

    def test_needs_closed_form(self):
        with pytest.raises(KeyError, match="no closed-form"):
            analytic_key_rate(b92(math.pi / 2), 1e8, EntropyPath.VON_NEUMANN)

    def test_rate_grows_with_block_size(self):
        inst = bb84(p_depol=0.01)
        rates = [analytic_key_rate(inst, n, "von-neumann").rate for n in (1e6, 1e8, 1e10)]
        assert rates == sorted(rates)
        assert rates[-1] < analytic_key_rate(inst, math.inf, "von-neumann").rate


@pytest.mark.slow
class TestCertifiedAgainstClosedForm:
    @pytest.mark.parametrize("N", [1e8, 1e10])
    def test_von_neumann_never_exceeds_closed_form(self, N):
        inst = bb84(p_depol=0.01)
        ev = evaluate_path(inst, N, EntropyPath.VON_NEUMANN)
        assert ev.result.rate <= analytic_key_rate(inst, N, "von-neumann").rate + 1e-6

    @pytest.mark.parametrize("path", [EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY])
    def test_finite_grid_matches_closed_form(self, path):
        inst = bb84(p_depol=0.005)
        rates = []
        for N in (1e6, 1e8, 1e10, 1e12):
            ev = evaluate_path(inst, N, path)
            assert ev.status is PointStatus.OK, ev.reason
            assert ev.result.ell is not None
            expected = analytic_key_rate(inst, N, path).rate
            assert ev.result.rate <= expected + 1e-6
            assert ev.result.rate == pytest.approx(expected, abs=1e-3)
            rates.append(ev.result.rate)
        assert rates == sorted(rates)
        assert rates[-1] > 0.0
