"""Tests for affine expressions and the LMI program builder."""

from __future__ import annotations

import numpy as np
import pytest

from qkdfk.sdp.certify import certify_dual
from qkdfk.sdp.lmi import AffineMatrix, AffineScalar, DualProgram, bmat
from qkdfk.sdp.problem import BoundDirection, Relation, Sense
from qkdfk.sdp.solver import solve


class TestAffineScalar:
    def test_arithmetic(self):
        prog = DualProgram()
        a = prog.scalar("a")
        b = prog.scalar("b")
        expr = 2.0 * a - b / 2.0 + 3.0
        assert expr.value([1.0, 4.0]) == pytest.approx(3.0)

    def test_merge_same_variable(self):
        prog = DualProgram()
        a = prog.scalar("a")
        expr = a + a - 0.5 * a
        assert list(expr.index) == [0]
        assert expr.value([2.0]) == pytest.approx(3.0)

    def test_const(self):
        assert AffineScalar.const(1.5).value([]) == 1.5


class TestAffineMatrix:
    def test_hermitian_variable_spans_basis(self):
        prog = DualProgram()
        m = prog.hermitian("M", 2)
        assert prog.num_variables == 4
        y = np.array([1.0, 2.0, 0.0, 0.0])
        assert np.allclose(m.value(y), np.diag([1.0, 2.0]))

    def test_real_variable(self):
        prog = DualProgram()
        m = prog.hermitian("M", 3, real=True)
        assert m.is_real
        assert prog.num_variables == 6

    def test_trace_and_inner(self):
        prog = DualProgram()
        m = prog.hermitian("M", 2)
        y = np.array([0.3, 0.7, 0.1, 0.2])
        value = m.value(y)
        assert m.trace().value(y) == pytest.approx(np.trace(value).real)
        c = np.array([[1.0, 0.5], [0.5, -1.0]])
        assert m.inner(c).value(y) == pytest.approx(np.vdot(c, value).real)

    def test_kron_and_congruence(self):
        prog = DualProgram()
        m = prog.hermitian("M", 2)
        y = np.array([0.3, 0.7, 0.1, 0.2])
        k = np.array([[1.0, 2.0], [0.0, 1.0]])
        assert np.allclose(m.kron_right(np.eye(2)).value(y), np.kron(m.value(y), np.eye(2)))
        assert np.allclose(m.kron_left(np.eye(3)).value(y), np.kron(np.eye(3), m.value(y)))
        assert np.allclose(m.congruence(k).value(y), k @ m.value(y) @ k.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="Cannot add"):
            AffineMatrix.zeros(2) + AffineMatrix.zeros(3)

    def test_affine_hermitian_enforces_equalities(self):
        prog = DualProgram()
        rho = prog.affine_hermitian("rho", 2, [(np.eye(2), 1.0), (np.diag([1.0, 0.0]), 0.25)])
        rng = np.random.default_rng(0)
        value = rho.value(rng.normal(size=prog.num_variables))
        assert np.trace(value).real == pytest.approx(1.0)
        assert value[0, 0].real == pytest.approx(0.25)

    def test_affine_hermitian_inconsistent(self):
        prog = DualProgram()
        with pytest.raises(ValueError, match="inconsistent"):
            prog.affine_hermitian("rho", 2, [(np.eye(2), 1.0), (np.eye(2), 2.0)])


class TestBmat:
    def test_fills_upper_blocks(self):
        prog = DualProgram()
        a = prog.scalar("a")
        m = bmat([[a, None], [np.array([[1.0], [2.0]]), np.eye(2)]])
        value = m.value([5.0])
        expected = np.array([[5.0, 1.0, 2.0], [1.0, 1.0, 0.0], [2.0, 0.0, 1.0]])
        assert np.allclose(value, expected)


class TestDualProgram:
    def test_duplicate_names_rejected(self):
        prog = DualProgram()
        t = prog.scalar("t")
        with pytest.raises(ValueError, match="already declared"):
            prog.scalar("t")
        prog.psd("c", t.as_matrix())
        with pytest.raises(ValueError, match="already registered"):
            prog.psd("c", t.as_matrix())

    def test_unused_variable_rejected(self):
        prog = DualProgram()
        t = prog.scalar("t")
        prog.scalar("unused")
        prog.psd("c", t.as_matrix())
        with pytest.raises(ValueError, match="appears in no LMI"):
            prog.compile()

    def test_compile_without_lmis(self):
        with pytest.raises(ValueError, match="no LMI"):
            DualProgram().compile()

    def test_scalar_program_is_certified(self):
        prog = DualProgram(Sense.MINIMIZE, name="t>=1")
        t = prog.scalar("t")
        prog.psd("t_ge_1", t - 1.0)
        prog.set_objective(t)
        prog.repair(["t_ge_1"], {0: 1.0}, "t")
        problem = prog.compile()
        bound = certify_dual(problem, solve(problem))
        # a minimizing program is bounded from above by any feasible point
        assert bound.direction is BoundDirection.UPPER
        assert bound.value >= 1.0
        assert bound.value == pytest.approx(1.0, abs=1e-6)

    def test_largest_eigenvalue(self):
        c = np.array([[2.0, 1.0], [1.0, 0.0]])
        prog = DualProgram(Sense.MINIMIZE)
        lam = prog.scalar("lam")
        eye = AffineMatrix(np.zeros((2, 2), dtype=complex), lam.index, np.eye(2)[None] + 0j)
        prog.psd("lmi", eye - c)
        prog.set_objective(lam)
        prog.repair(["lmi"], {0: 1.0}, "lam")
        problem = prog.compile()
        bound = certify_dual(problem, solve(problem))
        assert bound.value == pytest.approx(np.linalg.eigvalsh(c)[-1], abs=1e-6)

    def test_nonnegative_variables_become_inequalities(self):
        prog = DualProgram(Sense.MINIMIZE)
        t = prog.scalar("t", nonneg=True)
        prog.psd("c", t.as_matrix())
        prog.set_objective(t)
        problem = prog.compile()
        assert problem.constraints[0].relation is Relation.LE
        assert problem.sense is Sense.MAXIMIZE
