"""Finite-statistics corrections, the ε budget and the final key length.

All entropies are per kept (sifted) signal; ``p_pass`` converts the
SDP key terms, which are per transmitted signal, into that normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from qkdfk.matqi import binary_entropy
from qkdfk.minent import MinEntropyBound
from qkdfk.relent import KeyTermBound

DEFAULT_EPS_SEC = 1e-10
DEFAULT_EPS_COR = 1e-15
DEFAULT_ALPHA_PE = 0.10
DEFAULT_F_EC = 1.2
DEFAULT_N_PE = 2


class EntropyPath(str, Enum):
    VON_NEUMANN = "von-neumann"
    MIN_ENTROPY = "min-entropy"


class AttackModel(str, Enum):
    COLLECTIVE = "collective"
    COHERENT = "coherent"


def _check_probability(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


# ---------------------------------------------------------------------------
# Security parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecurityProfile:
    """Split of ``eps_sec`` into equal shares ``ε′``.

    von Neumann: ``ε = ε_PA = ε_EC = ε′`` and ``ε_PE^i = 2ε′`` for each of
    ``n_pe`` estimated constraints, so ``ε′ = ε_sec / (3 + 2 n_pe)`` (``/7``
    for two constraints). Min-entropy: no smoothing, ``ε′ = ε_sec / (2 + 2 n_pe)``.
    """

    eps_sec: float = DEFAULT_EPS_SEC
    eps_cor: float = DEFAULT_EPS_COR
    path: EntropyPath = EntropyPath.VON_NEUMANN
    n_pe: int = DEFAULT_N_PE
    """Number of constraints estimated from data."""

    def __post_init__(self) -> None:
        _check_probability("eps_sec", self.eps_sec)
        _check_probability("eps_cor", self.eps_cor)
        if self.n_pe < 0:
            raise ValueError(f"n_pe must be >= 0, got {self.n_pe}")
        object.__setattr__(self, "path", EntropyPath(self.path))

    @property
    def shares(self) -> int:
        base = 3 if self.path is EntropyPath.VON_NEUMANN else 2
        return base + 2 * self.n_pe

    @property
    def eps_prime(self) -> float:
        return self.eps_sec / self.shares

    @property
    def eps_pa(self) -> float:
        return self.eps_prime

    @property
    def eps_ec(self) -> float:
        return self.eps_prime

    @property
    def eps_smooth(self) -> float:
        return self.eps_prime if self.path is EntropyPath.VON_NEUMANN else 0.0

    @property
    def eps_pe_per_constraint(self) -> float:
        return 2.0 * self.eps_prime

    @property
    def eps_pe(self) -> float:
        return self.n_pe * self.eps_pe_per_constraint

    def budget_items(self) -> dict[str, float]:
        return {
            "eps": self.eps_smooth,
            "eps_PA": self.eps_pa,
            "eps_PE": self.eps_pe,
            "eps_EC": self.eps_ec,
        }

    def total(self) -> float:
        """Re-summed secrecy budget; equals ``eps_sec`` up to rounding."""
        return sum(self.budget_items().values())

    def for_path(self, path: EntropyPath) -> SecurityProfile:
        return replace(self, path=path)


@dataclass(frozen=True)
class TransmissionBudget:
    """How the ``N`` transmissions split into key and parameter-estimation signals."""

    N: float
    """Total transmissions; ``math.inf`` selects the asymptotic limit."""

    p_pass: float
    alpha_pe: float = DEFAULT_ALPHA_PE

    def __post_init__(self) -> None:
        if not self.N > 0:
            raise ValueError(f"N must be positive, got {self.N}")
        if not 0.0 < self.p_pass <= 1.0:
            raise ValueError(f"p_pass must lie in (0, 1], got {self.p_pass}")
        if not 0.0 <= self.alpha_pe < 1.0:
            raise ValueError(f"alpha_pe must lie in [0, 1), got {self.alpha_pe}")

    @property
    def is_asymptotic(self) -> bool:
        return math.isinf(self.N)

    @property
    def n(self) -> float:
        """Kept sifted signals ``round((1 − α_PE)·p_pass·N)``."""
        if self.is_asymptotic:
            return math.inf
        return float(round((1.0 - self.alpha_pe) * self.p_pass * self.N))

    @property
    def m(self) -> float:
        """Parameter-estimation sample ``round(α_PE·p_pass·N)``, shared by all constraints."""
        if self.is_asymptotic:
            return math.inf
        return float(round(self.alpha_pe * self.p_pass * self.N))

    @property
    def key_fraction(self) -> float:
        """``n/N``."""
        return (1.0 - self.alpha_pe) * self.p_pass if self.is_asymptotic else self.n / self.N


@dataclass(frozen=True)
class KeyRateResult:
    ell: int | None
    """Key length in bits; ``None`` in the asymptotic limit."""

    rate: float
    path: EntropyPath
    attack_model: AttackModel = AttackModel.COLLECTIVE
    N: float = math.inf
    n: float = math.inf
    components: dict[str, float] = field(default_factory=dict)
    eps_sec: float = DEFAULT_EPS_SEC

    def to_dict(self) -> dict[str, Any]:
        return {
            "ell": self.ell,
            "rate": self.rate,
            "path": self.path.value,
            "attack_model": self.attack_model.value,
            "N": self.N,
            "n": self.n,
            "eps_sec": self.eps_sec,
            "components": dict(self.components),
        }


# ---------------------------------------------------------------------------
# Statistical corrections
# ---------------------------------------------------------------------------


def deviation(m_i: float, d: int, eps_i: float) -> float:
    """``Δ = ½√((2 ln(1/ε) + d ln(m+1)) / m)``; 0 for ``m = inf``."""
    if math.isinf(m_i):
        return 0.0
    if m_i < 1:
        raise ValueError(f"m_i must be >= 1, got {m_i}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not 0.0 < eps_i < 1.0:
        raise ValueError(f"eps_i must lie in (0, 1), got {eps_i}")
    return 0.5 * math.sqrt((2.0 * math.log(1.0 / eps_i) + d * math.log(m_i + 1.0)) / m_i)


def gamma_bounds(gamma_obs: float, m_i: float, d: int, eps_i: float) -> tuple[float, float]:
    """``(max(γ − Δ, 0), min(γ + Δ, 1))``."""
    if not -1e-12 <= gamma_obs <= 1.0 + 1e-12:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma_obs}")
    delta = deviation(m_i, d, eps_i)
    return max(gamma_obs - delta, 0.0), min(gamma_obs + delta, 1.0)


def leak_ec(
    n: float,
    d: int,
    q_channel: float,
    f_ec: float = DEFAULT_F_EC,
    eps_ec: float = DEFAULT_EPS_SEC / 7,
) -> float:
    """Error-correction leakage in bits, ``n·(f·H(Z_A|Z_B) + log₂(d+3)·√(3 log₂(2/ε_EC)/n))``."""
    if n < 1 or math.isinf(n):
        raise ValueError(f"n must be a finite count >= 1, got {n}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if f_ec < 1.0:
        raise ValueError(f"f_ec must be >= 1, got {f_ec}")
    _check_probability("eps_ec", eps_ec)
    finite = math.log2(d + 3) * math.sqrt(3.0 * math.log2(2.0 / eps_ec) / n)
    return n * (f_ec * q_channel + finite)


def asymptotic_leak(q_channel: float, f_ec: float = DEFAULT_F_EC) -> float:
    """Leakage per kept signal in the ``n → ∞`` limit."""
    return f_ec * q_channel


def binary_leak_entropy(q: float) -> float:
    """``H(Z_A|Z_B)`` for a binary key with error rate ``q``."""
    return binary_entropy(min(max(q, 0.0), 1.0))


def entropy_correction(n: float, eps: float, d: int = 2) -> float:
    """``δ(n, ε) = (2d + 3)·√(log₂(2/ε)/n)``; 0 for ``n = inf``."""
    if math.isinf(n):
        return 0.0
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_probability("eps", eps)
    return (2 * d + 3) * math.sqrt(math.log2(2.0 / eps) / n)


# ---------------------------------------------------------------------------
# Key length
# ---------------------------------------------------------------------------


def _assemble(
    entropy: float,
    delta: float,
    budget: TransmissionBudget,
    profile: SecurityProfile,
    leak: float,
) -> KeyRateResult:
    if budget.is_asymptotic:
        bracket = entropy - delta - leak
        rate = max(0.0, budget.key_fraction * bracket)
        return KeyRateResult(
            ell=None,
            rate=rate,
            path=profile.path,
            N=budget.N,
            n=budget.n,
            components={"entropy": entropy, "delta": delta, "leak_per_n": leak},
            eps_sec=profile.eps_sec,
        )
    n = budget.n
    pa = 2.0 * math.log2(1.0 / (2.0 * profile.eps_pa))
    cor = math.log2(2.0 / profile.eps_cor)
    if n < 1:
        ell = 0
    else:
        ell = max(0, math.floor(n * (entropy - delta) - leak - pa - cor))
    return KeyRateResult(
        ell=ell,
        rate=ell / budget.N,
        path=profile.path,
        N=budget.N,
        n=n,
        components={
            "entropy": entropy,
            "delta": delta,
            "leak_per_n": leak / n if n >= 1 else 0.0,
            "pa_per_n": pa / n if n >= 1 else 0.0,
            "cor_per_n": cor / n if n >= 1 else 0.0,
        },
        eps_sec=profile.eps_sec,
    )


def key_length_vn(
    keyterm: KeyTermBound | float,
    budget: TransmissionBudget,
    profile: SecurityProfile,
    leak: float,
    key_dim: int = 2,
) -> KeyRateResult:
    """``ℓ = ⌊n(H − δ) − leak − 2 log₂(1/2ε_PA) − log₂(2/ε_cor)⌋`` clamped at 0.

    ``H = keyterm / p_pass``. ``leak`` is in bits for finite ``N`` and in bits
    per kept signal in the asymptotic limit.
    """
    value = keyterm.value if isinstance(keyterm, KeyTermBound) else float(keyterm)
    entropy = value / budget.p_pass
    delta = entropy_correction(budget.n, profile.eps_smooth or profile.eps_prime, key_dim)
    return _assemble(entropy, delta, budget, profile.for_path(EntropyPath.VON_NEUMANN), leak)


def key_length_min(
    minent: MinEntropyBound | float,
    budget: TransmissionBudget,
    profile: SecurityProfile,
    leak: float,
) -> KeyRateResult:
    """As :func:`key_length_vn` with ``δ = 0``; ``minent`` is ``H_min`` per sifted signal."""
    entropy = minent.hmin_value if isinstance(minent, MinEntropyBound) else float(minent)
    return _assemble(entropy, 0.0, budget, profile.for_path(EntropyPath.MIN_ENTROPY), leak)


def coherent_correction(result: KeyRateResult, N: float, d_signal: int) -> KeyRateResult:
    """Postselection-technique penalty ``r − 2(d⁴ − 1)·log₂(N+1)/N``.

    The collective-attack ``eps_sec`` maps to ``ε_sec^coh = ε_sec·(N+1)^(d⁴−1)``,
    reported as its base-10 logarithm because it overflows for realistic ``N``.
    """
    if d_signal < 1:
        raise ValueError(f"d_signal must be >= 1, got {d_signal}")
    if result.attack_model is AttackModel.COHERENT:
        return result
    power = d_signal**4 - 1
    components = dict(result.components)
    if math.isinf(N):
        penalty = 0.0
        components["log10_eps_sec_coherent"] = math.inf if power else math.log10(result.eps_sec)
    else:
        penalty = 2.0 * power * math.log2(N + 1.0) / N
        log_n = math.log10(N + 1.0)
        components["log10_eps_sec_coherent"] = math.log10(result.eps_sec) + power * log_n
    components["coherent_penalty"] = penalty
    rate = max(0.0, result.rate - penalty)
    ell = None if result.ell is None else math.floor(rate * N)
    return replace(
        result,
        ell=ell,
        rate=rate,
        attack_model=AttackModel.COHERENT,
        components=components,
    )

