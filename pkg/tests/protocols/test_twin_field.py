"""Tests for the twin-field builder and the repeaterless benchmark."""

from __future__ import annotations

import numpy as np
import pytest

from qkdfk.protocols.base import PLOB, Granularity
from qkdfk.protocols.twin_field import (
    CharlieOutcome,
    KeyBasis,
    charlie_povm,
    herald_probability,
    loss_db_to_eta,
    plob,
    twin_field,
)


class TestPlob:
    def test_values(self):
        assert plob(0.5) == pytest.approx(1.0)
        assert plob(0.1) == pytest.approx(0.1520, abs=1e-4)
        assert plob(0.0) == 0.0

    @pytest.mark.parametrize("eta", [1.0, -0.1])
    def test_rejects_out_of_range(self, eta):
        with pytest.raises(ValueError, match="eta"):
            plob(eta)

    def test_loss_conversion(self):
        assert loss_db_to_eta(10.0) == pytest.approx(0.1)
        assert loss_db_to_eta(0.0) == 1.0
        with pytest.raises(ValueError, match="loss_db"):
            loss_db_to_eta(-3.0)


class TestCharlie:
    @pytest.mark.parametrize("p_dark", [0.0, 1e-3, 0.2])
    def test_outcomes_form_sub_measurement(self, p_dark):
        minus = charlie_povm(p_dark, CharlieOutcome.PSI_MINUS)
        plus = charlie_povm(p_dark, "psi-plus")
        for op in (minus, plus):
            assert np.linalg.eigvalsh(op)[0] >= -1e-12
        assert np.linalg.eigvalsh(np.eye(4) - minus - plus)[0] >= -1e-12

    def test_rejects_bad_dark_count(self):
        with pytest.raises(ValueError, match="p_dark"):
            charlie_povm(1.5)

    def test_herald_grows_with_transmittance(self):
        assert herald_probability(0.5, 0.1, 0.0) < herald_probability(0.5, 0.5, 0.0)

    def test_outcomes_are_symmetric(self):
        minus = herald_probability(0.4, 0.3, 1e-4, CharlieOutcome.PSI_MINUS)
        plus = herald_probability(0.4, 0.3, 1e-4, CharlieOutcome.PSI_PLUS)
        assert minus == pytest.approx(plus)


class TestTwinField:
    def test_lossless_instance(self):
        inst = twin_field()
        assert inst.name == "twin_field"
        assert inst.dims == (2, 2)
        assert inst.granularity is Granularity.FINE
        assert PLOB not in inst.reference
        assert 0.0 <= inst.key_error_q <= 0.5

    def test_herald_folded_into_pass_probability(self):
        inst = twin_field(q=0.5, sqrt_eta=0.3)
        assert inst.herald_probability == pytest.approx(herald_probability(0.5, 0.3, 0.0))
        assert inst.p_pass == pytest.approx(inst.herald_probability * inst.sift_pass)

    def test_lossy_instance_has_benchmark(self):
        inst = twin_field(sqrt_eta=0.5)
        assert inst.reference.evaluate(PLOB) == pytest.approx(plob(0.25))

    def test_vacuum_never_heralds(self):
        with pytest.raises(ValueError, match="never heralds"):
            twin_field(q=1.0)

    def test_unused_key_basis(self):
        with pytest.raises(ValueError, match="never chosen"):
            twin_field(p_z=1.0, tf_key_basis=KeyBasis.X)

    def test_z_key_basis(self):
        inst = twin_field(sqrt_eta=0.5, p_z=0.7, tf_key_basis="Z")
        assert inst.parameters["tf_key_basis"] == "Z"
        assert inst.self_consistency() < 1e-10

    def test_dark_counts_raise_error_rate(self):
        clean = twin_field(sqrt_eta=0.3)
        noisy = twin_field(sqrt_eta=0.3, p_dark=0.05)
        assert noisy.key_error_q > clean.key_error_q
