"""Tests for the interior-point SDP solver."""

from __future__ import annotations

import numpy as np
import pytest

from qkdfk.sdp.problem import Block, LinearConstraint, Relation, SdpProblem, Sense, SolveStatus
from qkdfk.sdp.solver import InteriorPointSolver, solve


def _min_eigenvalue_problem(c: np.ndarray) -> SdpProblem:
    """min <C, X> s.t. Tr X = 1, whose optimum is the smallest eigenvalue of C."""
    n = c.shape[0]
    return SdpProblem(
        blocks=[Block("X", n)],
        objective={"X": c},
        constraints=[LinearConstraint({"X": np.eye(n)}, Relation.EQ, 1.0, "trace")],
        name="min-eig",
    )


class TestInteriorPointSolver:
    def test_rejects_bad_settings(self):
        with pytest.raises(ValueError, match="tolerance"):
            InteriorPointSolver(tol=0.0)
        with pytest.raises(ValueError, match="max_iter"):
            InteriorPointSolver(max_iter=0)

    def test_smallest_eigenvalue(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(4, 4))
        c = a + a.T
        sol = solve(_min_eigenvalue_problem(c))
        assert sol.ok
        assert sol.primal_value == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-6)
        assert sol.dual_value == pytest.approx(sol.primal_value, abs=1e-6)

    def test_complex_hermitian_data(self):
        c = np.array([[1.0, 1j], [-1j, 1.0]])
        sol = solve(_min_eigenvalue_problem(c))
        assert sol.ok
        assert sol.primal_value == pytest.approx(0.0, abs=1e-6)

    def test_maximize_with_inequalities(self):
        # max x11 s.t. Tr X = 1, x11 <= 0.7 on two blocks sharing the trace
        problem = SdpProblem(
            blocks=[Block("X", 2), Block("s", 1)],
            objective={"X": np.diag([1.0, 0.0])},
            constraints=[
                LinearConstraint({"X": np.eye(2), "s": np.eye(1)}, Relation.EQ, 1.0, "trace"),
                LinearConstraint({"X": np.diag([1.0, 0.0])}, Relation.LE, 0.7, "cap"),
            ],
            sense=Sense.MAXIMIZE,
        )
        sol = solve(problem)
        assert sol.ok
        assert sol.primal_value == pytest.approx(0.7, abs=1e-6)

    def test_infeasible_reported(self):
        problem = SdpProblem(
            blocks=[Block("x", 1)],
            objective={"x": np.eye(1)},
            constraints=[
                LinearConstraint({"x": np.eye(1)}, Relation.GE, 2.0, "lo"),
                LinearConstraint({"x": np.eye(1)}, Relation.LE, 1.0, "hi"),
            ],
        )
        sol = solve(problem)
        assert not sol.ok
        assert sol.status is SolveStatus.INFEASIBLE

    def test_primal_blocks_are_feasible(self):
        c = np.diag([3.0, 1.0, 2.0])
        sol = solve(_min_eigenvalue_problem(c))
        x = sol.primal_blocks["X"]
        assert np.trace(x).real == pytest.approx(1.0, abs=1e-7)
        assert x[1, 1].real == pytest.approx(1.0, abs=1e-5)

    def test_scalar_lower_bound_value(self):
        # min x s.t. x >= 1
        problem = SdpProblem(
            blocks=[Block("x", 1)],
            objective={"x": np.eye(1)},
            constraints=[LinearConstraint({"x": np.eye(1)}, Relation.GE, 1.0, "lo")],
            name="scalar",
        )
        sol = solve(problem)
        assert sol.status is SolveStatus.OPTIMAL
        assert sol.primal_value == pytest.approx(1.0, abs=1e-7)
        assert sol.dual_value == pytest.approx(1.0, abs=1e-7)
        assert sol.dual_multipliers[0] == pytest.approx(1.0, abs=1e-6)

    def test_orthant_and_psd_blocks_together(self):
        # min <C, X> + 2 t s.t. Tr X + t = 1, X11 >= 0.2: the cheaper of the
        # PSD corner (eigenvalue 1 at X11 = 0.2 plus 0.8 of eigenvalue 0.5)
        # and the scalar block
        c = np.diag([1.0, 0.5])
        problem = SdpProblem(
            blocks=[Block("X", 2), Block("t", 1)],
            objective={"X": c, "t": 2.0 * np.eye(1)},
            constraints=[
                LinearConstraint({"X": np.eye(2), "t": np.eye(1)}, Relation.EQ, 1.0, "trace"),
                LinearConstraint({"X": np.diag([1.0, 0.0])}, Relation.GE, 0.2, "floor"),
            ],
        )
        sol = solve(problem)
        assert sol.status is SolveStatus.OPTIMAL
        assert sol.primal_value == pytest.approx(0.2 + 0.8 * 0.5, abs=1e-7)
        assert sol.primal_blocks["t"][0, 0] == pytest.approx(0.0, abs=1e-6)
        assert sol.gap <= 1e-6

    def test_iterations_stay_small(self):
        sol = solve(_min_eigenvalue_problem(np.diag([2.0, -1.0, 0.5])))
        assert sol.status is SolveStatus.OPTIMAL
        assert sol.iterations < 50
