"""Tests for the BB84 builder."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from qkdfk.channels import depolarize
from qkdfk.protocols.base import HMIN, KEYTERM_VN, RATE, Granularity
from qkdfk.protocols.bb84 import (
    bb84,
    bell_pair,
    depolarized_bell_pair,
    flip_mixing,
    flip_noise,
    hmin_formula,
    vn_keyterm_formula,
)


class TestDepolarizedPair:
    def test_noiseless_is_pure(self):
        rho = depolarized_bell_pair(0.0)
        assert rho.matrix[0, 3].real == pytest.approx(0.5)

    def test_rejects_large_flip(self):
        with pytest.raises(ValueError, match="p_depol"):
            depolarized_bell_pair(0.3)

    def test_flip_is_a_quarter_of_the_mixing_weight(self):
        rho = depolarize(bell_pair(), flip_mixing(0.05), target=1).matrix
        plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
        minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
        z_errors = rho[1, 1] + rho[2, 2]
        x_errors = sum(
            np.vdot(v, rho @ v) for v in (np.kron(plus, minus), np.kron(minus, plus))
        )
        assert z_errors.real == pytest.approx(0.10)
        assert x_errors.real == pytest.approx(0.10)

    def test_error_rate_round_trip(self):
        assert flip_noise(0.10) == {"p_depol": pytest.approx(0.05)}
        assert bb84(**flip_noise(0.10)).key_error_q == pytest.approx(0.10)
        with pytest.raises(ValueError, match="Q must"):
            flip_noise(0.6)


class TestBB84:
    def test_basic_shape(self):
        inst = bb84()
        assert inst.name == "bb84"
        assert inst.dims == (2, 2)
        assert inst.constraints.names == ["E_Z", "E_X"]
        assert inst.p_pass == pytest.approx(0.5)
        assert inst.sift_pass == pytest.approx(0.5)

    @pytest.mark.parametrize("p", [0.0, 0.01, 0.05, 0.2])
    def test_error_rate_is_twice_flip(self, p):
        inst = bb84(p_depol=p)
        assert inst.key_error_q == pytest.approx(2 * p)
        assert inst.constraints["E_Z"].gamma == pytest.approx(2 * p)
        assert inst.constraints["E_X"].gamma == pytest.approx(2 * p)

    def test_self_consistency(self):
        assert bb84(p_depol=0.03).self_consistency() < 1e-10

    def test_biased_basis_choice(self):
        inst = bb84(p_z=0.8)
        assert inst.p_pass == pytest.approx(0.68)

    def test_single_basis_limit(self, caplog):
        with caplog.at_level(logging.WARNING):
            inst = bb84(p_z=1.0)
        assert inst.p_pass == pytest.approx(1.0)
        assert inst.notes
        assert "single-basis limit" in caplog.text

    def test_fine_granularity_adds_constraints(self):
        coarse = bb84(p_depol=0.01)
        fine = bb84(p_depol=0.01, granularity=Granularity.FINE)
        assert len(fine.constraints) > len(coarse.constraints)

    def test_rejects_bad_basis_probability(self):
        with pytest.raises(ValueError, match="p_z"):
            bb84(p_z=1.5)

    def test_to_dict(self):
        d = bb84(p_depol=0.01).to_dict()
        assert d["name"] == "bb84"
        assert d["constraints"]["E_Z"] == pytest.approx(0.02)
        assert d["reference"] == sorted([HMIN, KEYTERM_VN, RATE])


class TestReference:
    def test_noiseless_values(self):
        ref = bb84().reference
        assert ref.evaluate(KEYTERM_VN) == pytest.approx(0.5)
        assert ref.evaluate(HMIN) == pytest.approx(1.0)
        assert ref.evaluate(RATE) == pytest.approx(0.5)

    def test_rate_vanishes_at_threshold(self):
        # 1 - 2h(Q) = 0 at Q ~ 0.110028
        assert bb84().reference.evaluate(RATE, 0.110028) == pytest.approx(0.0, abs=1e-5)

    def test_formulas(self):
        assert vn_keyterm_formula(0.0, 1.0) == pytest.approx(1.0)
        assert hmin_formula(0.5) == pytest.approx(0.0)
