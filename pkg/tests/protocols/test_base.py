"""Tests for the shared protocol building blocks."""

from __future__ import annotations

import math

import numpy as np
import pytest

from qkdfk.matqi import DensityMatrix, projector
from qkdfk.protocols.base import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    Granularity,
    ParameterSpec,
    ReferenceFormulas,
    basis_povm,
    error_rate,
    statistics_observables,
)
from qkdfk.protocols.bb84 import BB84Protocol


class TestParameterSpec:
    def test_check_accepts_range(self):
        spec = ParameterSpec("p", 0.1, 0.0, 0.5)
        assert spec.check("0.25") == 0.25

    def test_check_rejects_out_of_range(self):
        spec = ParameterSpec("p", 0.1, 0.0, 0.5)
        with pytest.raises(ValueError, match="Parameter 'p' must lie in"):
            spec.check(0.6)

    def test_to_dict(self):
        d = ParameterSpec("p", 0.1, 0.0, 0.5, "flip").to_dict()
        assert d == {"name": "p", "default": 0.1, "range": [0.0, 0.5], "description": "flip"}


class TestReferenceFormulas:
    def test_evaluate_default_q(self):
        ref = ReferenceFormulas({"double": lambda q: 2 * q}, q=0.1)
        assert ref.evaluate("double") == pytest.approx(0.2)
        assert ref.evaluate("double", 0.3) == pytest.approx(0.6)
        assert "double" in ref

    def test_missing_formula(self):
        with pytest.raises(KeyError, match="No reference formula"):
            ReferenceFormulas().evaluate("rate")

    def test_evaluate_all(self):
        ref = ReferenceFormulas({"a": lambda q: q, "b": lambda q: 1 - q}, q=0.25)
        assert ref.evaluate_all() == {"a": 0.25, "b": 0.75}


class TestBasisPovm:
    def test_weighted_bases_are_complete(self):
        povm = basis_povm({"Z": (0.3, (KET_0, KET_1)), "X": (0.7, (KET_PLUS, KET_MINUS))})
        assert povm.completeness_error() < 1e-12
        assert povm.announcements == ["Z", "X"]

    def test_padding(self):
        povm = basis_povm({"Z": (1.0, (KET_0, KET_1))}, dim=3, complete=False)
        assert povm.dim == 3

    def test_incomplete_rejected(self):
        with pytest.raises(ValueError, match="sum to identity"):
            basis_povm({"Z": (0.5, (KET_0, KET_1))})


class TestStatistics:
    def test_coarse_filtered_by_name(self):
        tests = basis_povm({"Z": (1.0, (KET_0, KET_1))}, complete=False)
        obs = statistics_observables(tests, tests, (("Z", "Z"),), Granularity.COARSE, ["E_Z"])
        assert [o.name for o in obs] == ["E_Z"]

    def test_fine_has_one_observable_per_pair(self):
        tests = basis_povm({"Z": (1.0, (KET_0, KET_1))}, complete=False)
        obs = statistics_observables(tests, tests, (("Z", "Z"),), "fine")
        assert len(obs) == 4

    def test_error_rate(self):
        rho = DensityMatrix(np.diag([0.4, 0.1, 0.1, 0.4]).astype(complex), (2, 2))
        equal = np.kron(projector(KET_0), projector(KET_0)) + np.kron(
            projector(KET_1), projector(KET_1)
        )
        differ = np.eye(4) - equal
        assert error_rate(rho, equal, differ) == pytest.approx(0.2)

    def test_error_rate_without_coverage(self):
        rho = DensityMatrix(np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex), (2, 2))
        zero = np.zeros((4, 4))
        assert error_rate(rho, zero, zero) == 0.0


class TestProtocolBuild:
    def test_defaults_filled_in(self):
        inst = BB84Protocol().build()
        assert inst.parameters == {"p_depol": 0.0, "p_z": 0.5}

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="Unknown parameter"):
            BB84Protocol().build(theta=math.pi / 2)

    def test_range_checked(self):
        with pytest.raises(ValueError, match="Parameter 'p_depol' must lie in"):
            BB84Protocol().build(p_depol=0.4)

    def test_options_pass_through(self):
        inst = BB84Protocol().build(granularity="fine")
        assert inst.granularity is Granularity.FINE

    def test_metadata(self):
        meta = BB84Protocol().metadata()
        assert meta["name"] == "bb84"
        assert [p["name"] for p in meta["parameters"]] == ["p_depol", "p_z"]
        assert "granularity" in meta["options"]
