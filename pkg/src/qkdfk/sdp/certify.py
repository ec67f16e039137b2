"""Turning a numerical dual point into a certified bound, plus a Slater probe.

The solver's multipliers satisfy the dual constraints only up to its
tolerance. :func:`certify_dual` clamps sign-restricted multipliers and then
walks along the repair directions declared on the problem until every dual
slack is PSD, so the reported objective is a valid bound on the exact
optimum regardless of how well the solve converged.
"""

from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt

from qkdfk.sdp.problem import (
    Block,
    CertifiedBound,
    LinearConstraint,
    Relation,
    SdpProblem,
    SdpSolution,
    SlaterReport,
    SolverError,
    SolveStatus,
    Sense,
)
from qkdfk.sdp.solver import DEFAULT_TOL, InteriorPointSolver

logger = logging.getLogger(__name__)

MAX_RAW_VIOLATION = 1e-4
"""Largest pre-rounding PSD violation that rounding is allowed to absorb."""

REPAIR_MARGIN = 1e-12
SLATER_TOL = 1e-7

_PROBE_U = "__probe_u"
_PROBE_V = "__probe_v"


def _lambda_min(m: npt.NDArray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


def _norm(m: npt.NDArray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m)), initial=0.0))


def _psd_violation(slacks: dict[str, npt.NDArray]) -> float:
    return max(max(0.0, -_lambda_min(s)) for s in slacks.values())


def certify_dual(
    problem: SdpProblem,
    solution: SdpSolution,
    max_raw_violation: float = MAX_RAW_VIOLATION,
    margin: float = REPAIR_MARGIN,
) -> CertifiedBound:
    """Round ``solution``'s multipliers to an exactly feasible dual point.

    Raises :class:`SolverError` when the solve reported infeasibility, when the
    raw point is too far from feasible to round, or when a slack is still not
    PSD after all repairs (the problem declared no direction covering it).
    """
    if solution.status is SolveStatus.INFEASIBLE:
        raise SolverError(
            f"Cannot certify {problem.name or 'SDP'}: {solution.message or 'infeasible'}",
            solution.status,
        )
    y = np.array(solution.dual_multipliers, dtype=float, copy=True)
    if y.shape != (problem.num_constraints,):
        raise ValueError(f"Expected {problem.num_constraints} multipliers, got {y.shape}")
    signs = problem.multiplier_signs()
    wrong = signs * y < 0
    y[wrong] = 0.0

    slacks = problem.dual_slacks(y)
    raw = _psd_violation(slacks)
    if raw > max_raw_violation:
        raise SolverError(
            f"Dual point of {problem.name or 'SDP'} violates PSD by {raw:.3e} "
            f"(limit {max_raw_violation:.1e}, solver status {solution.status.value})",
            solution.status,
        )

    shift = 0.0
    for rep in problem.repairs:
        lam = min(_lambda_min(slacks[name]) for name in rep.targets)
        scale = max(_norm(slacks[name]) for name in rep.targets)
        step = max(0.0, -lam) + margin * (1.0 + scale)
        for j, d in rep.direction.items():
            y[j] += step * d
        shift += step
        slacks = problem.dual_slacks(y)
        logger.debug(
            "repair %s: step %.3e (lambda_min was %.3e)", rep.label or rep.targets, step, lam
        )

    psd_residual = _psd_violation(slacks)
    linear_residual = float(np.max(np.maximum(0.0, -signs * y), initial=0.0))
    if psd_residual > 0.0 or linear_residual > 0.0:
        bad = [name for name, s in slacks.items() if _lambda_min(s) < 0.0]
        raise SolverError(
            f"Rounded dual point of {problem.name or 'SDP'} is still infeasible "
            f"(PSD {psd_residual:.3e} on {bad}, sign {linear_residual:.3e})",
            solution.status,
        )
    return CertifiedBound(
        value=problem.dual_objective(y),
        direction=problem.bound_direction,
        psd_residual=psd_residual,
        linear_residual=linear_residual,
        raw_psd_violation=raw,
        shift=shift,
        multipliers=y,
    )


# ---------------------------------------------------------------------------
# Strict feasibility
# ---------------------------------------------------------------------------


def _probe(problem: SdpProblem) -> SdpProblem:
    """``max t`` over ``X_k = X'_k + t·I`` with every inequality slack at least ``t``."""
    blocks = list(problem.blocks) + [Block(_PROBE_U, 1), Block(_PROBE_V, 1)]
    constraints = []
    for con in problem.constraints:
        shift = sum(float(np.real(np.trace(a))) for a in con.coefficients.values())
        if con.relation is Relation.GE:
            shift -= 1.0
        elif con.relation is Relation.LE:
            shift += 1.0
        coeffs = dict(con.coefficients)
        coeffs[_PROBE_U] = np.array([[shift]])
        coeffs[_PROBE_V] = np.array([[-shift]])
        constraints.append(LinearConstraint(coeffs, con.relation, con.bound, con.name))
    for name in (_PROBE_U, _PROBE_V):
        constraints.append(LinearConstraint({name: np.array([[1.0]])}, Relation.LE, 1.0, name))
    return SdpProblem(
        blocks=blocks,
        objective={_PROBE_U: np.array([[1.0]]), _PROBE_V: np.array([[-1.0]])},
        constraints=constraints,
        sense=Sense.MAXIMIZE,
        name=f"{problem.name or 'sdp'}-slater",
    )


def _feasibility(problem: SdpProblem) -> SdpProblem:
    return SdpProblem(
        blocks=list(problem.blocks),
        objective={},
        constraints=list(problem.constraints),
        sense=Sense.MINIMIZE,
        name=f"{problem.name or 'sdp'}-feasibility",
    )


def check_slater(
    problem: SdpProblem, tol: float = SLATER_TOL, solver_tol: float = DEFAULT_TOL
) -> SlaterReport:
    """Probe whether ``problem``'s primal has a strictly feasible point.

    A positive probe margin means a point exists with every block ⪰ margin·I
    and every inequality satisfied with slack, so strong duality holds and
    the certified dual bound is tight up to solver accuracy.
    """
    solver = InteriorPointSolver(tol=solver_tol)
    probe = _probe(problem)
    sol = solver.solve(probe)
    if sol.ok:
        t = float(np.real(sol.primal_blocks[_PROBE_U][0, 0] - sol.primal_blocks[_PROBE_V][0, 0]))
        point = {
            b.name: sol.primal_blocks[b.name] + t * np.eye(b.dim) for b in problem.blocks
        }
        if t > tol:
            return SlaterReport(True, False, t, sol.status, "strictly feasible", point)
    else:
        t = float("nan")
        point = {}

    feas = solver.solve(_feasibility(problem))
    if feas.status is SolveStatus.INFEASIBLE:
        return SlaterReport(False, True, t, feas.status, feas.message or "primal infeasible", {})
    message = "feasible but not strictly" if sol.ok else f"probe failed: {sol.message}"
    if not point and feas.ok:
        point = dict(feas.primal_blocks)
    logger.info("Slater check on %s: %s (margin %.3e)", problem.name or "SDP", message, t)
    return SlaterReport(False, False, t, sol.status, message, point)


def interior_point(problem: SdpProblem, tol: float = SLATER_TOL) -> dict[str, npt.NDArray]:
    """A (preferably strictly) feasible primal point; raises if none is found."""
    report = check_slater(problem, tol=tol)
    if report.infeasible or not report.point:
        raise SolverError(
            f"No feasible point for {problem.name or 'SDP'}: {report.message}", report.status
        )
    return report.point
