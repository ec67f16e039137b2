"""Von Neumann key term: ``min_ρ D(S(ρ) ‖ Z(S(ρ)))`` with a certified lower bound.

The objective ``f(ρ) = Σ_b w_b D(Φ_b(ρ) ‖ pinch_b Φ_b(ρ))`` (bits) equals
``p_pass·H(Z_A|E)`` of the sifted state. It is handled in two steps:

1. **Step one** finds a near-optimal ``ρ̂`` with Frank-Wolfe iterations on
   the linearized objective (the default) or, on request, with the (m,k)
   semidefinite approximation of the relative entropy.
2. **Step two** linearizes ``f`` at ``ρ̂`` and bounds the linear term from
   below by a certified dual point::

       f(ρ*) ≥ f(ρ̂) − Tr(∇f ρ̂) + min_{σ feasible} Tr(∇f σ)

Only step two enters the reported value, so a poor step one costs tightness,
never validity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.optimize

from qkdfk.channels import SiftMap
from qkdfk.constraints import ConstraintSet
from qkdfk.matqi import (
    DEFAULT_EPS_PERT,
    DensityMatrix,
    HermitianMatrix,
    as_matrix,
    hermitian,
    identity_vec,
    is_real,
    mat_log2_regularized,
    relative_entropy,
)
from qkdfk.sdp import (
    AffineMatrix,
    Block,
    CertifiedBound,
    DualProgram,
    DualRepair,
    LinearConstraint,
    Relation,
    SdpProblem,
    Sense,
    SolverError,
    bmat,
    certify_dual,
    interior_point,
)
from qkdfk.sdp.solver import DEFAULT_TOL, InteriorPointSolver

logger = logging.getLogger(__name__)

FW_TOL = 1e-10
FW_MAX_ITER = 40


class StepOneMethod(str, Enum):
    AUTO = "auto"
    SDP = "sdp"
    FRANK_WOLFE = "frank-wolfe"


@dataclass(frozen=True)
class QreApproxConfig:
    """Parameters of the relative-entropy approximation and of both steps."""

    m: int = 4
    """Gauss-Legendre quadrature points."""

    k: int = 4
    """Square-root (geometric mean) levels."""

    eps_pert: float = DEFAULT_EPS_PERT
    """Spectral perturbation for matrix logarithms."""

    step_one: StepOneMethod = StepOneMethod.AUTO
    solver_tol: float = DEFAULT_TOL
    solver_max_iter: int = 200
    fw_max_iter: int = FW_MAX_ITER
    fw_tol: float = FW_TOL

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"QreApproxConfig.m must be >= 1, got {self.m}")
        if self.k < 0:
            raise ValueError(f"QreApproxConfig.k must be >= 0, got {self.k}")
        if not 0.0 <= self.eps_pert <= 1e-6:
            raise ValueError(f"eps_pert must lie in [0, 1e-6], got {self.eps_pert}")
        object.__setattr__(self, "step_one", StepOneMethod(self.step_one))

    def solver(self) -> InteriorPointSolver:
        return InteriorPointSolver(tol=self.solver_tol, max_iter=self.solver_max_iter)


@dataclass(frozen=True, eq=False)
class KeyTermBound:
    """Certified lower bound on ``min p_pass·H(Z_A|E)`` over the feasible set."""

    value: float
    rho_hat: DensityMatrix
    certificate: CertifiedBound
    step_one_value: float
    """``f(ρ̂)``; ``value`` never exceeds it."""

    method: StepOneMethod
    p_pass: float
    iterations: int = 0
    fallback: bool = False
    """``True`` when step one failed and ``ρ̂`` is the central feasible point."""

    notes: list[str] = field(default_factory=list)

    @property
    def linearization_gap(self) -> float:
        return self.step_one_value - self.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "step_one_value": self.step_one_value,
            "method": self.method.value,
            "p_pass": self.p_pass,
            "iterations": self.iterations,
            "fallback": self.fallback,
            "certificate": self.certificate.to_dict(),
        }


# ---------------------------------------------------------------------------
# Objective and gradient
# ---------------------------------------------------------------------------


def gauss_legendre_unit(m: int) -> tuple[npt.NDArray[np.floating], npt.NDArray[np.floating]]:
    """Nodes and weights of the ``m``-point Gauss-Legendre rule on ``[0, 1]``."""
    if m < 1:
        raise ValueError(f"Quadrature needs m >= 1, got {m}")
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1.0) / 2.0, w / 2.0


def keyterm_objective(rho: object, sift: SiftMap, eps_pert: float = DEFAULT_EPS_PERT) -> float:
    """``f(ρ) = D(S(ρ) ‖ Z(S(ρ)))`` in bits."""
    m = as_matrix(rho)
    total = 0.0
    for block in sift.blocks:
        if block.weight == 0.0:
            continue
        out = block.forward(m)
        total += block.weight * relative_entropy(out, block.pinch(out), eps_pert)
    return total


def grad_objective(
    rho_hat: object, sift: SiftMap, eps_pert: float = DEFAULT_EPS_PERT
) -> HermitianMatrix:
    """``∇f = Σ_b w_b Φ_b†(log₂ Φ_b(ρ) − log₂ pinch_b Φ_b(ρ))`` on the input space.

    The identity terms from differentiating ``Tr A log A`` cancel because the
    key projectors resolve the identity on each block output.
    """
    m = as_matrix(rho_hat)
    grad = np.zeros((sift.input_dim, sift.input_dim), dtype=complex)
    for block in sift.blocks:
        if block.weight == 0.0:
            continue
        out = block.forward(m)
        log_out = mat_log2_regularized(out, eps_pert)
        diff = log_out - mat_log2_regularized(block.pinch(out), eps_pert)
        grad += block.weight * block.adjoint(diff)
    return hermitian(grad)


def _project_state(m: npt.ArrayLike, dims: tuple[int, ...]) -> DensityMatrix:
    """Nearest-looking density matrix: symmetrize, clamp eigenvalues, renormalize."""
    h = np.asarray(m, dtype=complex)
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("Cannot project a negative semidefinite matrix onto the state space")
    return DensityMatrix.from_operator((v * (w / w.sum())) @ v.conj().T, dims)


# ---------------------------------------------------------------------------
# Step two: the linear problem
# ---------------------------------------------------------------------------

SIGMA = "sigma"


def build_linear_sdp(constraints: ConstraintSet, gradient: npt.ArrayLike) -> SdpProblem:
    """``min Tr(∇f σ)`` over states with ``γ^LB ≤ Tr(Γ_i σ) ≤ γ^UB``.

    Row 0 is ``Tr σ = 1``. Its multiplier is the ``z`` of the dual program
    ``max z + Σ(x_i γ^LB − y_i γ^UB)  s.t.  zI + Σ(x_i − y_i)Γ_i ⪯ ∇f``,
    and lowering it raises the dual slack by ``I``, which is the repair
    direction used for certification.
    """
    grad = hermitian(gradient)
    dim = constraints.dim
    if grad.shape[0] != dim:
        raise ValueError(f"Gradient is {grad.shape[0]}-dim, constraints act on {dim}")
    rows = [LinearConstraint({SIGMA: np.eye(dim)}, Relation.EQ, 1.0, "trace")]
    for c in constraints.independent_tight():
        rows.append(LinearConstraint({SIGMA: c.observable}, Relation.EQ, c.lower, c.name))
    for c in constraints:
        if c.is_tight:
            continue
        rows.append(LinearConstraint({SIGMA: c.observable}, Relation.GE, c.lower, f"{c.name}>="))
        rows.append(LinearConstraint({SIGMA: c.observable}, Relation.LE, c.upper, f"{c.name}<="))
    return SdpProblem(
        blocks=[Block(SIGMA, dim)],
        objective={SIGMA: grad},
        constraints=rows,
        sense=Sense.MINIMIZE,
        repairs=(DualRepair((SIGMA,), {0: -1.0}, "trace multiplier"),),
        name="linearized-keyterm",
    )


def central_feasible_state(
    constraints: ConstraintSet, dims: tuple[int, ...]
) -> DensityMatrix:
    """Feasible state maximizing the smallest eigenvalue (maximally mixed when allowed)."""
    problem = build_linear_sdp(constraints, np.zeros((constraints.dim, constraints.dim)))
    point = interior_point(problem)
    return _project_state(point[SIGMA], dims)


# ---------------------------------------------------------------------------
# Step one: (m,k) relative-entropy SDP
# ---------------------------------------------------------------------------


def _qre_program(
    constraints: ConstraintSet, sift: SiftMap, cfg: QreApproxConfig
) -> tuple[DualProgram, AffineMatrix]:
    """``min Σ_b w_b τ_b / ln 2`` with ``τ_b ≥`` the (m,k) approximation of ``D``.

    Per block, with ``A = Φ_b(ρ)``, ``X = A ⊗ I`` and ``Y = I ⊗ conj(pinch A)``:

    - ``[[M_i, M_{i+1}], [M_{i+1}, X]] ⪰ 0`` for ``i < k``, ``M_0 = Y``, ``M_k = Z``;
    - ``[[Tr A − s_j t_j / w_j, (X e)†], [X e, X + s_j (Z − X)]] ⪰ 0`` per node;
    - ``2^k Σ_j t_j + τ ≥ 0``.

    ``ρ`` is parametrized with the exact constraints (and ``Tr ρ = 1``)
    eliminated; interval constraints become scalar inequalities.
    """
    real = sift.is_real and all(is_real(c.observable) for c in constraints)
    dim = constraints.dim
    if sift.input_dim != dim:
        raise ValueError(f"Sift map acts on {sift.input_dim} dims, constraints on {dim}")
    equalities: list[tuple[npt.ArrayLike, float]] = [(np.eye(dim), 1.0)]
    equalities += [(c.observable, c.lower) for c in constraints if c.is_tight]
    prog = DualProgram(Sense.MINIMIZE, name=f"qre-m{cfg.m}-k{cfg.k}")
    try:
        rho = prog.affine_hermitian("rho", dim, equalities, real=real)
    except ValueError as exc:
        raise SolverError(f"Exact constraints admit no state: {exc}") from exc
    prog.psd("rho_psd", rho)
    for c in constraints:
        if c.is_tight:
            continue
        val = rho.inner(c.observable)
        prog.psd(f"{c.name}_lb", val - c.lower)
        prog.psd(f"{c.name}_ub", c.upper - val)

    nodes, weights = gauss_legendre_unit(cfg.m)
    objective = None
    for b, block in enumerate(sift.blocks):
        if block.weight == 0.0:
            continue
        n = block.output_dim
        eye = np.eye(n)
        a = rho.congruence_sum(block.kraus)
        x = a.kron_right(eye)
        y = a.pinch(block.key_projectors).conj().kron_left(eye)
        chain = [y]
        for i in range(1, cfg.k + 1):
            chain.append(prog.hermitian(f"M{b}_{i}", n * n, real=real))
        for i in range(cfg.k):
            prog.psd(f"geo{b}_{i}", bmat([[chain[i], None], [chain[i + 1], x]]))
        z = chain[-1]
        e = identity_vec(n)
        xe = x.column(e)
        tr_a = a.trace()
        t_sum = None
        for j, (s, w) in enumerate(zip(nodes, weights)):
            t = prog.scalar(f"t{b}_{j}")
            prog.psd(
                f"quad{b}_{j}",
                bmat([[tr_a - t * (s / w), None], [xe, x + (z - x) * s]]),
            )
            t_sum = t if t_sum is None else t_sum + t
        tau = prog.scalar(f"tau{b}")
        prog.psd(f"tau{b}_ge", t_sum * (2.0**cfg.k) + tau)
        term = tau * (block.weight / math.log(2.0))
        objective = term if objective is None else objective + term
    if objective is None:
        raise ValueError("Every sift block has zero weight")
    prog.set_objective(objective)
    return prog, rho


def build_qre_sdp(constraints: ConstraintSet, sift: SiftMap, cfg: QreApproxConfig) -> SdpProblem:
    """The (m,k) approximation of ``min f(ρ)`` as a block SDP (see :func:`_qre_program`)."""
    prog, _ = _qre_program(constraints, sift, cfg)
    return prog.compile()


def _step_one_sdp(
    constraints: ConstraintSet, sift: SiftMap, cfg: QreApproxConfig, dims: tuple[int, ...]
) -> tuple[DensityMatrix, int]:
    prog, rho = _qre_program(constraints, sift, cfg)
    solution = cfg.solver().solve(prog.compile())
    if not solution.ok:
        raise SolverError(
            f"(m,k) SDP did not converge: {solution.message or solution.status.value}",
            solution.status,
        )
    logger.debug(
        "(m,k) SDP value %.10g after %d iterations", solution.dual_value, solution.iterations
    )
    return _project_state(rho.value(solution.dual_multipliers), dims), solution.iterations


def _step_one_frank_wolfe(
    constraints: ConstraintSet, sift: SiftMap, cfg: QreApproxConfig, start: DensityMatrix
) -> tuple[DensityMatrix, int]:
    solver = cfg.solver()
    rho = start
    f_rho = keyterm_objective(rho, sift, cfg.eps_pert)
    it = 0
    for it in range(1, cfg.fw_max_iter + 1):
        grad = grad_objective(rho, sift, cfg.eps_pert)
        sol = solver.solve(build_linear_sdp(constraints, grad))
        if not sol.ok:
            logger.warning(
                "Frank-Wolfe direction solve failed at iteration %d: %s", it, sol.message
            )
            break
        target = _project_state(sol.primal_blocks[SIGMA], rho.dims)
        delta = target.matrix - rho.matrix
        if abs(float(np.real(np.vdot(delta, grad)))) <= cfg.fw_tol:
            break
        base = rho.matrix

        def along(step: float, base: npt.NDArray = base, delta: npt.NDArray = delta) -> float:
            return keyterm_objective(base + step * delta, sift, cfg.eps_pert)

        res = scipy.optimize.minimize_scalar(along, bounds=(0.0, 1.0), method="bounded")
        step = float(res.x)
        f_new = float(res.fun)
        if f_new > f_rho - 1e-10:
            break
        rho = _project_state(base + step * delta, rho.dims)
        logger.debug("Frank-Wolfe it %d: f %.10g -> %.10g (step %.3g)", it, f_rho, f_new, step)
        f_rho = f_new
    return rho, it


def _use_sdp(cfg: QreApproxConfig) -> bool:
    """Only an explicit ``sdp`` setting selects the (m,k) SDP; ``auto`` runs Frank-Wolfe."""
    return cfg.step_one is StepOneMethod.SDP


def certified_keyterm(
    constraints: ConstraintSet,
    sift: SiftMap,
    cfg: QreApproxConfig | None = None,
    dims: tuple[int, ...] | None = None,
) -> KeyTermBound:
    """Two-step certified lower bound on ``min f(ρ)`` over the constraint set."""
    cfg = cfg or QreApproxConfig()
    dims = dims or (constraints.dim,)
    notes: list[str] = []
    use_sdp = _use_sdp(cfg)
    method = StepOneMethod.SDP if use_sdp else StepOneMethod.FRANK_WOLFE
    fallback = False
    iterations = 0
    try:
        if use_sdp:
            rho_hat, iterations = _step_one_sdp(constraints, sift, cfg, dims)
        else:
            start = central_feasible_state(constraints, dims)
            rho_hat, iterations = _step_one_frank_wolfe(constraints, sift, cfg, start)
    except (SolverError, np.linalg.LinAlgError, ValueError) as exc:
        logger.warning(
            "Step one (%s) failed, using the central feasible state: %s", method.value, exc
        )
        notes.append(f"step one failed: {exc}")
        rho_hat = central_feasible_state(constraints, dims)
        fallback = True

    f_hat = keyterm_objective(rho_hat, sift, cfg.eps_pert)
    grad = grad_objective(rho_hat, sift, cfg.eps_pert)
    problem = build_linear_sdp(constraints, grad)
    solution = cfg.solver().solve(problem)
    certificate = certify_dual(problem, solution)
    value = f_hat - float(np.real(np.vdot(grad, rho_hat.matrix))) + certificate.value
    p_pass = float(np.real(np.vdot(sift.pass_operator(), rho_hat.matrix)))
    logger.info(
        "key term: f(rho_hat) %.8g, certified %.8g (gap %.2e, %s, %d iterations)",
        f_hat, value, f_hat - value, method.value, iterations,
    )
    return KeyTermBound(
        value=value,
        rho_hat=rho_hat,
        certificate=certificate,
        step_one_value=f_hat,
        method=method,
        p_pass=p_pass,
        iterations=iterations,
        fallback=fallback,
        notes=notes,
    )
