"""Base interface for protocol builders and the instances they produce."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt

from qkdfk.channels import Povm, SiftMap, coarse_grain, fine_grain, sift_apply
from qkdfk.constraints import ConstraintSet, Observable
from qkdfk.matqi import DensityMatrix, HermitianMatrix, projector

logger = logging.getLogger(__name__)

SELF_CONSISTENCY_TOL = 1e-10

KEYTERM_VN = "keyterm_vn"
"""Asymptotic ``p_pass·H(Z_A|E)`` per transmission of the simulated state."""

HMIN = "hmin"
"""Asymptotic ``H_min(Z_A|E)`` per sifted signal."""

RATE = "rate"
"""Asymptotic key rate per transmission with ideal error correction."""

RATE_PER_SIFTED = "rate_per_sifted"
PLOB = "plob"

KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
KET_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)


class Granularity(str, Enum):
    COARSE = "coarse"
    FINE = "fine"


@dataclass(frozen=True)
class ParameterSpec:
    """One argument of a protocol builder."""

    name: str
    default: float
    lower: float
    upper: float
    description: str = ""

    def check(self, value: float) -> float:
        v = float(value)
        if not self.lower <= v <= self.upper:
            raise ValueError(
                f"Parameter {self.name!r} must lie in [{self.lower}, {self.upper}], got {v}"
            )
        return v

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "default": self.default,
            "range": [self.lower, self.upper],
            "description": self.description,
        }


@dataclass(frozen=True)
class ReferenceFormulas:
    """Closed-form values attached to an instance where the literature has them.

    Each formula takes the error rate, so finite-key callers can evaluate it
    at a worst-case ``Q``; ``q`` is the simulated one.
    """

    formulas: Mapping[str, Callable[[float], float]] = field(default_factory=dict)
    q: float = 0.0

    def __contains__(self, name: object) -> bool:
        return name in self.formulas

    @property
    def names(self) -> list[str]:
        return sorted(self.formulas)

    def evaluate(self, name: str, q: float | None = None) -> float:
        try:
            fn = self.formulas[name]
        except KeyError:
            raise KeyError(f"No reference formula {name!r}; available: {self.names}") from None
        return float(fn(self.q if q is None else q))

    def evaluate_all(self) -> dict[str, float]:
        return {name: self.evaluate(name) for name in self.names}


@dataclass(frozen=True, eq=False)
class ProtocolInstance:
    """Everything the key-rate pipeline needs for one protocol at fixed parameters."""

    name: str
    rho_sim: DensityMatrix
    """Simulated post-channel (and, for heralded protocols, post-herald) state."""

    sift: SiftMap
    constraints: ConstraintSet
    """Constraints carrying the simulated values, all tight."""

    key_error_q: float
    """Error rate of the raw key, used for the error-correction leakage."""

    p_pass: float
    """Probability per transmission that a round ends up in the raw key."""

    dims: tuple[int, ...]
    herald_probability: float = 1.0
    parameters: dict[str, Any] = field(default_factory=dict)
    reference: ReferenceFormulas = field(default_factory=ReferenceFormulas)
    granularity: Granularity = Granularity.COARSE
    notes: tuple[str, ...] = ()

    @property
    def sift_pass(self) -> float:
        """``Tr S(ρ_sim)``, the pass probability of the sift map alone."""
        return self.p_pass / self.herald_probability

    @property
    def d_signal(self) -> int:
        return self.rho_sim.dim

    def self_consistency(self) -> float:
        """Largest ``|Tr(ρ_sim Γ_i) − γ_i|`` over the constraints."""
        return max(
            (abs(c.value(self.rho_sim) - c.gamma) for c in self.constraints), default=0.0
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "p_pass": self.p_pass,
            "herald_probability": self.herald_probability,
            "key_error_q": self.key_error_q,
            "sift_mode": self.sift.mode.value,
            "granularity": self.granularity.value,
            "constraints": {c.name: c.gamma for c in self.constraints},
            "parameters": dict(self.parameters),
            "reference": self.reference.names,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Helpers shared by the builders
# ---------------------------------------------------------------------------


def basis_povm(
    bases: Mapping[str, tuple[float, Sequence[npt.ArrayLike]]],
    dim: int | None = None,
    extra: Iterable[tuple[str, int, npt.ArrayLike]] = (),
    complete: bool = True,
) -> Povm:
    """POVM with elements ``w·|v⟩⟨v|``; the value of a vector is its position in its basis.

    Vectors shorter than ``dim`` are zero padded.
    """
    labelled: list[tuple[str, int, npt.ArrayLike]] = []
    for announcement, (weight, vectors) in bases.items():
        for value, vec in enumerate(vectors):
            v = np.asarray(vec, dtype=complex)
            if dim is not None and v.shape[0] < dim:
                v = np.concatenate([v, np.zeros(dim - v.shape[0], dtype=complex)])
            labelled.append((announcement, value, weight * projector(v)))
    labelled.extend(extra)
    return Povm.from_operators(labelled, complete=complete)


def statistics_observables(
    alice: Povm,
    bob: Povm,
    keep: Sequence[tuple[str, str]],
    granularity: Granularity,
    names: Iterable[str] | None = None,
) -> list[Observable]:
    """Coarse (equal/differ) or fine (per element pair) observables, optionally filtered by name."""
    granularity = Granularity(granularity)
    if granularity is Granularity.FINE:
        return fine_grain(alice, bob, keep)
    out = coarse_grain(alice, bob, keep)
    if names is not None:
        wanted = set(names)
        out = [o for o in out if o.name in wanted]
    return out


def error_rate(rho: DensityMatrix, equal: HermitianMatrix, differ: HermitianMatrix) -> float:
    """``Tr(ρ E) / Tr(ρ (C + E))``, the error rate among the rounds the observables cover."""
    e = rho.expectation(differ)
    total = rho.expectation(equal) + e
    if total <= 0.0:
        return 0.0
    return min(max(e / total, 0.0), 1.0)


def assemble_instance(
    name: str,
    rho: DensityMatrix,
    sift: SiftMap,
    observables: Iterable[Observable],
    *,
    key_error_q: float,
    parameters: dict[str, Any],
    herald_probability: float = 1.0,
    reference: ReferenceFormulas | None = None,
    granularity: Granularity = Granularity.COARSE,
    notes: Iterable[str] = (),
) -> ProtocolInstance:
    """Read the constraint values off ``rho`` and check the instance is usable."""
    constraints = ConstraintSet.from_state(list(observables), rho)
    for c in constraints:
        if not c.statistical:
            continue
        if not -SELF_CONSISTENCY_TOL <= c.value(rho) <= 1.0 + SELF_CONSISTENCY_TOL:
            raise ValueError(f"{name}: simulated value of {c.name} is not a probability")
    _, sift_pass = sift_apply(sift, rho)
    p_pass = herald_probability * sift_pass
    if not p_pass > 0.0:
        raise ValueError(f"{name}: no round passes the postselection (p_pass = {p_pass:.3e})")
    instance = ProtocolInstance(
        name=name,
        rho_sim=rho,
        sift=sift,
        constraints=constraints,
        key_error_q=key_error_q,
        p_pass=p_pass,
        dims=rho.dims,
        herald_probability=herald_probability,
        parameters=parameters,
        reference=reference or ReferenceFormulas(),
        granularity=Granularity(granularity),
        notes=tuple(notes),
    )
    for note in instance.notes:
        logger.warning("%s: %s", name, note)
    return instance


# ---------------------------------------------------------------------------
# Protocol interface
# ---------------------------------------------------------------------------


class Protocol(ABC):
    """A named family of protocol instances."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Unique identifier, e.g. ``bb84``."""

    @property
    @abstractmethod
    def parameters(self) -> tuple[ParameterSpec, ...]:
        """Numeric arguments accepted by :meth:`build`."""

    description: str = ""
    options: tuple[str, ...] = ()
    """Non-numeric keyword arguments (``granularity`` and friends)."""

    @abstractmethod
    def _build(self, **params: Any) -> ProtocolInstance:
        """Construct an instance from validated parameters."""

    def build(self, **params: Any) -> ProtocolInstance:
        """Fill in defaults, range-check the numeric parameters and build."""
        specs = {p.name: p for p in self.parameters}
        unknown = set(params) - set(specs) - set(self.options)
        if unknown:
            raise ValueError(
                f"Unknown parameter(s) for {self.name}: {sorted(unknown)}; "
                f"expected {sorted(specs) + list(self.options)}"
            )
        values: dict[str, Any] = {n: s.default for n, s in specs.items()}
        for key, value in params.items():
            values[key] = specs[key].check(value) if key in specs else value
        return self._build(**values)

    def noise_for_error_rate(self, q: float) -> dict[str, float]:
        """Builder arguments whose simulated key error rate is ``q``.

        Backs the sweep's ``Q`` axis; protocols without such a mapping raise
        :class:`NotImplementedError`.
        """
        raise NotImplementedError(f"{self.name} has no error-rate parametrization")

    @property
    def has_error_rate_axis(self) -> bool:
        return type(self).noise_for_error_rate is not Protocol.noise_for_error_rate

    def metadata(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": [p.to_dict() for p in self.parameters],
            "options": list(self.options),
        }
