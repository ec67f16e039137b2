"""From a protocol instance to key lengths on both entropy paths.

Each evaluation fixes ``N`` (``math.inf`` for the asymptotic limit), splits
the security parameter, widens the statistical constraints by the
parameter-estimation deviation, runs the certified solver for the chosen
path and composes the key length. The closed-form variant
:func:`analytic_key_rate` applies the same corrections to a protocol's
reference formula at the worst-case error rate.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

from qkdfk.finitekey import (
    DEFAULT_ALPHA_PE,
    DEFAULT_EPS_COR,
    DEFAULT_EPS_SEC,
    DEFAULT_F_EC,
    AttackModel,
    EntropyPath,
    KeyRateResult,
    SecurityProfile,
    TransmissionBudget,
    asymptotic_leak,
    binary_leak_entropy,
    coherent_correction,
    deviation,
    key_length_min,
    key_length_vn,
    leak_ec,
)
from qkdfk.minent import build_minent_dual, certified_minent
from qkdfk.protocols.base import HMIN, KEYTERM_VN, ProtocolInstance
from qkdfk.relent import QreApproxConfig, build_linear_sdp, certified_keyterm, grad_objective
from qkdfk.sdp.problem import SolverError, SolveStatus, dump_sdpa

logger = logging.getLogger(__name__)

KEY_ALPHABET = 2


class PointStatus(str, Enum):
    OK = "ok"
    FALLBACK = "fallback"
    """Step one failed; the bound is still certified but looser."""

    NO_SAMPLES = "no-samples"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"
    ERROR = "error"

    @property
    def certified(self) -> bool:
        return self in (PointStatus.OK, PointStatus.FALLBACK, PointStatus.NO_SAMPLES)


@dataclass(frozen=True)
class PipelineSettings:
    """Everything besides the instance and ``N`` that a key length depends on."""

    eps_sec: float = DEFAULT_EPS_SEC
    eps_cor: float = DEFAULT_EPS_COR
    alpha_pe: float = DEFAULT_ALPHA_PE
    f_ec: float = DEFAULT_F_EC
    attack_model: AttackModel = AttackModel.COLLECTIVE
    qre: QreApproxConfig = field(default_factory=QreApproxConfig)
    dump_dir: Path | None = None
    """When set, every solved SDP is written there in the sparse text layout."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "attack_model", AttackModel(self.attack_model))
        if self.f_ec < 1.0:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")

    def profile(self, instance: ProtocolInstance, path: EntropyPath) -> SecurityProfile:
        n_pe = sum(1 for c in instance.constraints if c.statistical)
        return SecurityProfile(self.eps_sec, self.eps_cor, EntropyPath(path), n_pe)

    def budget(self, instance: ProtocolInstance, N: float) -> TransmissionBudget:
        return TransmissionBudget(N=N, p_pass=instance.p_pass, alpha_pe=self.alpha_pe)


@dataclass(frozen=True)
class PathEvaluation:
    """Outcome of one path at one ``N``."""

    result: KeyRateResult
    entropy_term: float
    """Certified entropy per kept signal before finite-size deductions."""

    status: PointStatus = PointStatus.OK
    reason: str = ""
    elapsed_s: float = 0.0

    @property
    def path(self) -> EntropyPath:
        return self.result.path

    @property
    def certified(self) -> bool:
        return self.status.certified

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.result.to_dict(),
            "entropy_term": self.entropy_term,
            "status": self.status.value,
            "certified": self.certified,
            "reason": self.reason,
            "elapsed_s": self.elapsed_s,
        }


def _zero(
    path: EntropyPath,
    N: float,
    settings: PipelineSettings,
    status: PointStatus,
    reason: str,
) -> PathEvaluation:
    ell = None if math.isinf(N) else 0
    result = KeyRateResult(
        ell=ell,
        rate=0.0,
        path=path,
        attack_model=settings.attack_model,
        N=N,
        n=math.inf if math.isinf(N) else 0.0,
        eps_sec=settings.eps_sec,
    )
    return PathEvaluation(result=result, entropy_term=0.0, status=status, reason=reason)


def _leak(
    instance: ProtocolInstance,
    budget: TransmissionBudget,
    profile: SecurityProfile,
    settings: PipelineSettings,
) -> float:
    h = binary_leak_entropy(instance.key_error_q)
    if budget.is_asymptotic:
        return asymptotic_leak(h, settings.f_ec)
    if budget.n < 1:
        return 0.0
    return leak_ec(budget.n, KEY_ALPHABET, h, settings.f_ec, profile.eps_ec)


def _finish(
    result: KeyRateResult, instance: ProtocolInstance, N: float, settings: PipelineSettings
) -> KeyRateResult:
    if settings.attack_model is AttackModel.COHERENT:
        return coherent_correction(result, N, instance.d_signal)
    return result


def _dump(settings: PipelineSettings, tag: str, problem: Any) -> None:
    if settings.dump_dir is None:
        return
    settings.dump_dir.mkdir(parents=True, exist_ok=True)
    target = dump_sdpa(problem, settings.dump_dir / f"{tag}.dat-s")
    logger.debug("wrote %s", target)


def _dump_tag(instance: ProtocolInstance, path: EntropyPath, N: float) -> str:
    numeric = sorted(
        (k, v) for k, v in instance.parameters.items() if isinstance(v, (int, float))
    )
    params = "_".join(f"{k}={v:.6g}" for k, v in numeric)
    n_text = "inf" if math.isinf(N) else f"{N:.3g}"
    return f"{instance.name}_{path.value}_N={n_text}_{params}".replace("/", "-")


def evaluate_path(
    instance: ProtocolInstance,
    N: float,
    path: EntropyPath | str,
    settings: PipelineSettings | None = None,
) -> PathEvaluation:
    """Certified key length of ``instance`` after ``N`` transmissions on one path.

    Solver failures never raise: they come back as a zero-rate evaluation
    whose status names the failure.
    """
    settings = settings or PipelineSettings()
    path = EntropyPath(path)
    start = time.perf_counter()
    profile = settings.profile(instance, path)
    budget = settings.budget(instance, N)

    if not budget.is_asymptotic and budget.m < 1 and instance.constraints.has_statistical:
        logger.info("%s at N=%.3g: no parameter-estimation samples", instance.name, N)
        return _zero(path, N, settings, PointStatus.NO_SAMPLES, "m < 1")

    constraints = instance.constraints.with_bounds(budget.m, profile.eps_pe_per_constraint)
    leak = _leak(instance, budget, profile, settings)
    tag = _dump_tag(instance, path, N)
    try:
        if path is EntropyPath.VON_NEUMANN:
            bound = certified_keyterm(constraints, instance.sift, settings.qre, instance.dims)
            if settings.dump_dir is not None:
                grad = grad_objective(bound.rho_hat, instance.sift, settings.qre.eps_pert)
                _dump(settings, tag, build_linear_sdp(constraints, grad))
            # key term is per post-herald signal; the budget counts every transmission
            per_transmission = bound.value * instance.herald_probability
            result = key_length_vn(per_transmission, budget, profile, leak, KEY_ALPHABET)
            status = PointStatus.FALLBACK if bound.fallback else PointStatus.OK
            reason = "; ".join(bound.notes)
        else:
            if settings.dump_dir is not None:
                _dump(settings, tag, build_minent_dual(constraints, instance.sift))
            hmin = certified_minent(
                constraints,
                instance.sift,
                p_pass=instance.sift_pass,
                tol=settings.qre.solver_tol,
                max_iter=settings.qre.solver_max_iter,
            )
            result = key_length_min(hmin, budget, profile, leak)
            status, reason = PointStatus.OK, ""
    except SolverError as exc:
        failed = (
            PointStatus.INFEASIBLE
            if exc.status is SolveStatus.INFEASIBLE
            else PointStatus.NUMERICAL_FAILURE
        )
        logger.warning("%s %s at N=%.3g: %s", instance.name, path.value, N, exc)
        return replace(
            _zero(path, N, settings, failed, str(exc)),
            elapsed_s=time.perf_counter() - start,
        )

    result = _finish(result, instance, N, settings)
    elapsed = time.perf_counter() - start
    logger.info(
        "%s %s N=%s: H=%.6g rate=%.6g (%.2fs)",
        instance.name, path.value, "inf" if math.isinf(N) else f"{N:.3g}",
        result.components.get("entropy", 0.0), result.rate, elapsed,
    )
    return PathEvaluation(
        result=result,
        entropy_term=result.components.get("entropy", 0.0),
        status=status,
        reason=reason,
        elapsed_s=elapsed,
    )


def evaluate(
    instance: ProtocolInstance,
    N: float,
    paths: tuple[EntropyPath | str, ...] = (EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY),
    settings: PipelineSettings | None = None,
) -> dict[EntropyPath, PathEvaluation]:
    """:func:`evaluate_path` for each requested path."""
    return {EntropyPath(p): evaluate_path(instance, N, p, settings) for p in paths}


def best_rate(evaluations: dict[EntropyPath, PathEvaluation]) -> float:
    """The larger of the certified rates; both are valid lower bounds."""
    return max((e.result.rate for e in evaluations.values() if e.certified), default=0.0)


# ---------------------------------------------------------------------------
# Closed-form counterpart
# ---------------------------------------------------------------------------


def worst_case_error(instance: ProtocolInstance, m: float, eps_pe: float) -> float:
    """``min(Q + Δ(m, 2, ε_PE^i), ½)``."""
    if math.isinf(m):
        return instance.key_error_q
    return min(instance.key_error_q + deviation(m, KEY_ALPHABET, eps_pe), 0.5)


def analytic_key_rate(
    instance: ProtocolInstance,
    N: float,
    path: EntropyPath | str,
    settings: PipelineSettings | None = None,
) -> KeyRateResult:
    """Key length from the instance's reference formula at the worst-case ``Q``.

    Needs the ``keyterm_vn`` or ``hmin`` formula; only protocols with a
    closed-form entropy (BB84) carry them. Leakage uses the simulated ``Q``.
    """
    settings = settings or PipelineSettings()
    path = EntropyPath(path)
    name = KEYTERM_VN if path is EntropyPath.VON_NEUMANN else HMIN
    if name not in instance.reference:
        raise KeyError(f"{instance.name} has no closed-form {name}")
    profile = settings.profile(instance, path)
    budget = settings.budget(instance, N)
    if not budget.is_asymptotic and budget.m < 1:
        return _zero(path, N, settings, PointStatus.NO_SAMPLES, "m < 1").result
    q_ub = worst_case_error(instance, budget.m, profile.eps_pe_per_constraint)
    entropy = instance.reference.evaluate(name, q_ub)
    leak = _leak(instance, budget, profile, settings)
    if path is EntropyPath.VON_NEUMANN:
        result = key_length_vn(entropy * instance.herald_probability, budget, profile, leak)
    else:
        result = key_length_min(max(entropy, 0.0), budget, profile, leak)
    return _finish(result, instance, N, settings)
