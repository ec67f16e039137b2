"""Tests for the certified von Neumann key term."""

from __future__ import annotations

import numpy as np
import pytest

from qkdfk import relent
from qkdfk.protocols.bb84 import bb84, vn_keyterm_formula
from qkdfk.relent import (
    QreApproxConfig,
    StepOneMethod,
    build_linear_sdp,
    build_qre_sdp,
    central_feasible_state,
    certified_keyterm,
    gauss_legendre_unit,
    grad_objective,
    keyterm_objective,
)
from qkdfk.sdp.problem import SolverError


@pytest.fixture
def noisy_bb84():
    return bb84(p_depol=0.025)


class TestQreApproxConfig:
    def test_defaults(self):
        cfg = QreApproxConfig()
        assert (cfg.m, cfg.k) == (4, 4)
        assert cfg.step_one is StepOneMethod.AUTO

    def test_step_one_from_string(self):
        assert QreApproxConfig(step_one="frank-wolfe").step_one is StepOneMethod.FRANK_WOLFE

    @pytest.mark.parametrize(
        "kwargs, match",
        [({"m": 0}, "m must be"), ({"k": -1}, "k must be"), ({"eps_pert": 1e-3}, "eps_pert")],
    )
    def test_validation(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            QreApproxConfig(**kwargs)


class TestObjective:
    def test_quadrature_rule(self):
        nodes, weights = gauss_legendre_unit(5)
        assert weights.sum() == pytest.approx(1.0)
        assert np.all((nodes > 0) & (nodes < 1))
        # exact for polynomials of degree 2m - 1
        assert float(weights @ nodes**9) == pytest.approx(0.1)

    def test_noiseless_bb84_value(self):
        inst = bb84()
        assert keyterm_objective(inst.rho_sim, inst.sift) == pytest.approx(0.5, abs=1e-6)

    def test_simulated_state_value(self, noisy_bb84):
        value = keyterm_objective(noisy_bb84.rho_sim, noisy_bb84.sift)
        assert value == pytest.approx(vn_keyterm_formula(0.05, 0.5), abs=1e-7)

    @pytest.mark.parametrize("q", [0.0, 0.02, 0.05, 0.11])
    def test_certified_value_matches_formula(self, q):
        inst = bb84(p_depol=q / 2)
        bound = certified_keyterm(inst.constraints, inst.sift, dims=inst.dims)
        expected = vn_keyterm_formula(q, 0.5)
        assert bound.value <= expected + 1e-6
        assert bound.value == pytest.approx(expected, abs=1e-3)

    def test_gradient_matches_finite_difference(self, noisy_bb84):
        rho = noisy_bb84.rho_sim.matrix
        grad = grad_objective(rho, noisy_bb84.sift)
        direction = np.eye(4) / 4 - rho
        h = 1e-6
        f_plus = keyterm_objective(rho + h * direction, noisy_bb84.sift)
        f_minus = keyterm_objective(rho - h * direction, noisy_bb84.sift)
        numeric = (f_plus - f_minus) / (2 * h)
        assert np.real(np.vdot(grad, direction)) == pytest.approx(numeric, abs=1e-5)


class TestLinearSdp:
    def test_dimension_mismatch(self, noisy_bb84):
        with pytest.raises(ValueError, match="Gradient is 2-dim"):
            build_linear_sdp(noisy_bb84.constraints, np.eye(2))

    def test_interval_constraints_become_inequalities(self, noisy_bb84):
        bounded = noisy_bb84.constraints.with_bounds(1e5, 1e-10)
        problem = build_linear_sdp(bounded, np.eye(4))
        # trace row plus a lower and an upper row per widened constraint
        assert problem.num_constraints == 1 + 2 * len(bounded)

    def test_central_state_is_feasible(self, noisy_bb84):
        rho = central_feasible_state(noisy_bb84.constraints, noisy_bb84.dims)
        assert noisy_bb84.constraints.max_violation(rho) <= 1e-7

    def test_qre_sdp_compiles(self, noisy_bb84):
        problem = build_qre_sdp(noisy_bb84.constraints, noisy_bb84.sift, QreApproxConfig(m=2, k=2))
        assert problem.num_constraints > 0


class TestCertifiedKeyterm:
    def test_close_to_formula(self, noisy_bb84):
        bound = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, dims=noisy_bb84.dims)
        expected = vn_keyterm_formula(0.05, 0.5)
        assert bound.value <= expected + 1e-6
        assert bound.value == pytest.approx(expected, abs=1e-3)
        assert bound.value <= bound.step_one_value + 1e-12
        assert bound.linearization_gap >= -1e-12
        assert not bound.fallback

    def test_auto_runs_frank_wolfe(self, noisy_bb84):
        bound = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, dims=noisy_bb84.dims)
        assert bound.method is StepOneMethod.FRANK_WOLFE
        assert not bound.fallback
        assert bound.value == pytest.approx(0.3568, abs=1e-3)

    def test_frank_wolfe_step_one(self, noisy_bb84):
        cfg = QreApproxConfig(step_one=StepOneMethod.FRANK_WOLFE)
        bound = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, cfg, noisy_bb84.dims)
        assert bound.method is StepOneMethod.FRANK_WOLFE
        assert bound.value == pytest.approx(vn_keyterm_formula(0.05, 0.5), abs=1e-3)

    def test_step_one_failure_falls_back(self, noisy_bb84, monkeypatch):
        def broken(*args, **kwargs):
            raise SolverError("did not converge")

        monkeypatch.setattr(relent, "_step_one_sdp", broken)
        cfg = QreApproxConfig(step_one=StepOneMethod.SDP)
        bound = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, cfg, noisy_bb84.dims)
        assert bound.fallback
        assert any("did not converge" in n for n in bound.notes)
        # still a lower bound, only looser
        assert bound.value <= vn_keyterm_formula(0.05, 0.5) + 1e-6

    def test_finite_statistics_lower_the_bound(self, noisy_bb84):
        tight = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, dims=noisy_bb84.dims)
        wide = certified_keyterm(
            noisy_bb84.constraints.with_bounds(1e4, 1e-10), noisy_bb84.sift, dims=noisy_bb84.dims
        )
        assert wide.value < tight.value

    def test_to_dict(self, noisy_bb84):
        bound = certified_keyterm(noisy_bb84.constraints, noisy_bb84.sift, dims=noisy_bb84.dims)
        d = bound.to_dict()
        assert d["method"] in ("sdp", "frank-wolfe")
        assert "certificate" in d
