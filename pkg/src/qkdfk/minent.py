"""Min-entropy key term through the fidelity formulation.

``H_min(Z_A|E) = −log₂ max_σ F(ρ̃, Z(σ))`` for the sifted state
``ρ̃ = S(ρ)/p_pass``. Maximizing ``√F`` jointly over ``ρ`` in the feasible set
and over ``σ`` is a linear SDP; its dual is built directly so that any dual
feasible point, however early the solver stops, upper bounds ``√F`` and
therefore lower bounds the min-entropy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from qkdfk.channels import SiftMap
from qkdfk.constraints import ConstraintSet
from qkdfk.matqi import hermitian, is_real
from qkdfk.sdp import (
    AffineMatrix,
    AffineScalar,
    CertifiedBound,
    DualProgram,
    SdpProblem,
    Sense,
    bmat,
    certify_dual,
)
from qkdfk.sdp.solver import DEFAULT_MAX_ITER, DEFAULT_TOL, InteriorPointSolver

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinEntropyBound:
    hmin_value: float
    """Certified lower bound on ``H_min(Z_A|E)`` of the sifted state."""

    fidelity_sqrt: float
    """Certified upper bound on ``max √F(S(ρ), Z(σ))``."""

    p_pass: float
    certificate: CertifiedBound

    @property
    def rate_term(self) -> float:
        """``p_pass·H_min``, the per-signal entropy entering the key length."""
        return self.p_pass * self.hmin_value

    def to_dict(self) -> dict[str, Any]:
        return {
            "hmin_value": self.hmin_value,
            "fidelity_sqrt": self.fidelity_sqrt,
            "p_pass": self.p_pass,
            "rate_term": self.rate_term,
            "certificate": self.certificate.to_dict(),
        }


def _diagonal_direction(prog: DualProgram, name: str, dim: int) -> dict[int, float]:
    # hermitian_basis lists the diagonal units E_ii first
    idx = prog.indices(name)
    return {int(j): 1.0 for j in idx[:dim]}


def _minent_program(constraints: ConstraintSet, sift: SiftMap) -> DualProgram:
    """``min z + ȳ + Σ(y_i γ^UB − x_i γ^LB) + Σ w_i γ_i`` subject to

    - ``Σ(y_i − x_i)Γ_i + Σ w_i Γ_i + ȳI − Σ_b w_b Φ_b†(Y11_b) ⪰ 0``
    - ``zI − pinch_b(Y22_b) ⪰ 0`` for each block
    - ``[[Y11_b, −I/2], [−I/2, Y22_b]] ⪰ 0`` for each block

    Interval constraints carry the sign-restricted ``x_i, y_i``; exact ones a
    free ``w_i`` (only for observables independent of the identity).
    """
    dim = constraints.dim
    if sift.input_dim != dim:
        raise ValueError(f"Sift map acts on {sift.input_dim} dims, constraints on {dim}")
    real = sift.is_real and all(is_real(c.observable) for c in constraints)
    prog = DualProgram(Sense.MINIMIZE, name="minent-dual")
    z = prog.scalar("z")
    ybar = prog.scalar("ybar")
    objective: AffineScalar = z + ybar
    lhs: AffineMatrix = ybar.as_matrix().kron_right(np.eye(dim))

    for c in constraints.independent_tight():
        w = prog.scalar(f"w[{c.name}]")
        lhs = lhs + w.as_matrix().kron_right(c.observable)
        objective = objective + w * c.lower
    for c in constraints:
        if c.is_tight:
            continue
        x = prog.scalar(f"x[{c.name}]", nonneg=True)
        y = prog.scalar(f"y[{c.name}]", nonneg=True)
        lhs = lhs + (y - x).as_matrix().kron_right(c.observable)
        objective = objective + y * c.upper - x * c.lower

    l3_names = []
    diag_dir: dict[int, float] = {}
    l2_names = []
    for b, block in enumerate(sift.blocks):
        if block.weight == 0.0:
            continue
        n = block.output_dim
        y11 = prog.hermitian(f"Y11_{b}", n, real=real)
        y22 = prog.hermitian(f"Y22_{b}", n, real=real)
        adj = y11.congruence_sum([k.conj().T for k in block.kraus])
        lhs = lhs - adj * block.weight
        l2 = z.as_matrix().kron_right(np.eye(n)) - y22.pinch(block.key_projectors)
        prog.psd(f"L2_{b}", l2)
        prog.psd(f"L3_{b}", bmat([[y11, None], [-0.5 * np.eye(n), y22]]))
        l2_names.append(f"L2_{b}")
        l3_names.append(f"L3_{b}")
        diag_dir.update(_diagonal_direction(prog, f"Y11_{b}", n))
        diag_dir.update(_diagonal_direction(prog, f"Y22_{b}", n))
    if not l3_names:
        raise ValueError("Every sift block has zero weight")
    prog.psd("L1", lhs)
    prog.set_objective(objective)
    prog.repair(l3_names, diag_dir, "Y diagonal")
    prog.repair(["L1"], {int(prog.indices("ybar")[0]): 1.0}, "ybar")
    prog.repair(l2_names, {int(prog.indices("z")[0]): 1.0}, "z")
    return prog


def build_minent_dual(constraints: ConstraintSet, sift: SiftMap) -> SdpProblem:
    """The dual program for ``max √F`` as a block SDP (see :func:`_minent_program`)."""
    return _minent_program(constraints, sift).compile()


def certified_minent(
    constraints: ConstraintSet,
    sift: SiftMap,
    p_pass: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MinEntropyBound:
    """Certified ``H_min`` lower bound, ``−2 log₂ v + log₂ p_pass``.

    ``p_pass`` defaults to the pass probability of the central feasible
    state; protocols pass the simulated value.
    """
    problem = build_minent_dual(constraints, sift)
    solution = InteriorPointSolver(tol=tol, max_iter=max_iter).solve(problem)
    certificate = certify_dual(problem, solution)
    if p_pass is None:
        from qkdfk.relent import central_feasible_state

        rho = central_feasible_state(constraints, (constraints.dim,))
        p_pass = float(np.real(np.vdot(sift.pass_operator(), rho.matrix)))
    if not 0.0 < p_pass <= 1.0 + 1e-12:
        raise ValueError(f"p_pass must lie in (0, 1], got {p_pass}")
    v = min(certificate.value, 1.0)
    if v <= 0.0:
        raise ValueError(f"Certified fidelity bound is not positive ({certificate.value:.3e})")
    hmin = -2.0 * math.log2(v) + math.log2(min(p_pass, 1.0))
    logger.info("min-entropy: sqrt F <= %.8g, H_min >= %.8g (p_pass %.6g)", v, hmin, p_pass)
    return MinEntropyBound(hmin_value=hmin, fidelity_sqrt=v, p_pass=p_pass, certificate=certificate)


# ---------------------------------------------------------------------------
# Fidelity of two fixed operators
# ---------------------------------------------------------------------------


def build_fidelity_dual(p: npt.ArrayLike, q: npt.ArrayLike) -> SdpProblem:
    """``min Tr(P Y11) + Tr(Q Y22)`` s.t. ``[[Y11, −I/2], [−I/2, Y22]] ⪰ 0``.

    The optimum is ``√F(P, Q)``.
    """
    hp, hq = hermitian(p), hermitian(q)
    if hp.shape != hq.shape:
        raise ValueError(f"Operators have shapes {hp.shape} and {hq.shape}")
    n = hp.shape[0]
    real = is_real(hp) and is_real(hq)
    prog = DualProgram(Sense.MINIMIZE, name="fidelity-dual")
    y11 = prog.hermitian("Y11", n, real=real)
    y22 = prog.hermitian("Y22", n, real=real)
    prog.psd("L3", bmat([[y11, None], [-0.5 * np.eye(n), y22]]))
    prog.set_objective(y11.inner(hp) + y22.inner(hq))
    direction = _diagonal_direction(prog, "Y11", n)
    direction.update(_diagonal_direction(prog, "Y22", n))
    prog.repair(["L3"], direction, "Y diagonal")
    return prog.compile()


def fidelity_sqrt_bound(
    p: npt.ArrayLike, q: npt.ArrayLike, tol: float = DEFAULT_TOL
) -> CertifiedBound:
    """Certified upper bound on ``√F(P, Q)``."""
    problem = build_fidelity_dual(p, q)
    solution = InteriorPointSolver(tol=tol).solve(problem)
    return certify_dual(problem, solution)
