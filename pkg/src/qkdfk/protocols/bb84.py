"""Entanglement-based BB84 with a depolarized Bell pair."""

from __future__ import annotations

import math
from typing import Any

from qkdfk.channels import build_sift_map, depolarize
from qkdfk.matqi import DensityMatrix, binary_entropy
from qkdfk.protocols.base import (
    HMIN,
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    KEYTERM_VN,
    RATE,
    Granularity,
    ParameterSpec,
    Protocol,
    ProtocolInstance,
    ReferenceFormulas,
    assemble_instance,
    basis_povm,
    statistics_observables,
)

BB84_KEEP = (("Z", "Z"), ("X", "X"))

MAX_FLIP = 0.25
"""Largest per-basis flip parameter; ``Q = 2p`` reaches 1/2 there."""


def flip_mixing(p_depol: float) -> float:
    """Depolarizing mixing probability ``4p`` for a per-basis flip parameter ``p``."""
    if not 0.0 <= p_depol <= MAX_FLIP:
        raise ValueError(f"p_depol must lie in [0, {MAX_FLIP}], got {p_depol}")
    return 4.0 * p_depol


def flip_noise(q: float) -> dict[str, float]:
    """Builder arguments giving error rate ``q`` in both bases (``p_depol = q/2``)."""
    if not 0.0 <= q <= 2.0 * MAX_FLIP:
        raise ValueError(f"Q must lie in [0, {2.0 * MAX_FLIP}], got {q}")
    return {"p_depol": q / 2.0}


def bell_pair() -> DensityMatrix:
    return DensityMatrix.from_vector([1.0, 0.0, 0.0, 1.0], (2, 2))


def depolarized_bell_pair(p_depol: float) -> DensityMatrix:
    """``Φ⁺`` with Bob's qubit sent through a Pauli channel flipping each basis with ``2p``.

    Each of ``X, Y, Z`` acts with probability ``p``, i.e. the depolarizing
    channel with mixing probability ``4p``; this is the convention under which
    ``Q_Z = Q_X = 2p``.
    """
    return depolarize(bell_pair(), flip_mixing(p_depol), target=1)


def vn_keyterm_formula(q: float, p_z: float) -> float:
    """``(p_Z² + p_X²)(1 − h₂(Q))``."""
    return (p_z**2 + (1.0 - p_z) ** 2) * (1.0 - binary_entropy(q))


def hmin_formula(q: float) -> float:
    """``1 − log₂(1 + 2√(Q(1−Q)))`` per sifted signal."""
    return 1.0 - math.log2(1.0 + 2.0 * math.sqrt(q * (1.0 - q)))


def bb84_formulas(q: float, p_z: float) -> ReferenceFormulas:
    sifted = p_z**2 + (1.0 - p_z) ** 2
    return ReferenceFormulas(
        {
            KEYTERM_VN: lambda x: vn_keyterm_formula(x, p_z),
            HMIN: hmin_formula,
            RATE: lambda x: sifted * (1.0 - 2.0 * binary_entropy(x)),
        },
        q=q,
    )


def bb84(
    p_depol: float = 0.0,
    p_z: float = 0.5,
    granularity: Granularity | str = Granularity.COARSE,
    dilate: bool = False,
) -> ProtocolInstance:
    """BB84 with key bits from both bases and error-rate constraints ``E_Z, E_X``."""
    if not 0.0 <= p_z <= 1.0:
        raise ValueError(f"p_z must lie in [0, 1], got {p_z}")
    granularity = Granularity(granularity)
    rho = depolarized_bell_pair(p_depol)
    p_x = 1.0 - p_z
    z_basis = (KET_0, KET_1)
    x_basis = (KET_PLUS, KET_MINUS)
    alice = basis_povm({"Z": (p_z, z_basis), "X": (p_x, x_basis)})
    bob = basis_povm({"Z": (p_z, z_basis), "X": (p_x, x_basis)})
    weights = {"Z": p_z, "X": p_x}
    keep = tuple(pair for pair in BB84_KEEP if weights[pair[0]] > 0.0)
    sift = build_sift_map(alice, bob, keep, dilate=dilate)

    tests = basis_povm({"Z": (1.0, z_basis), "X": (1.0, x_basis)}, complete=False)
    observables = statistics_observables(tests, tests, BB84_KEEP, granularity, names=("E_Z", "E_X"))

    q = 2.0 * p_depol
    notes = []
    if p_z in (0.0, 1.0):
        notes.append(
            "single-basis limit: one basis never produces data, its constraint is degenerate"
        )
    params: dict[str, Any] = {"p_depol": p_depol, "p_z": p_z}
    return assemble_instance(
        "bb84",
        rho,
        sift,
        observables,
        key_error_q=q,
        parameters=params,
        reference=bb84_formulas(q, p_z),
        granularity=granularity,
        notes=notes,
    )


class BB84Protocol(Protocol):
    description = "Entanglement-based BB84, depolarizing noise with Q = 2p"
    options = ("granularity", "dilate")

    @property
    def name(self) -> str:
        return "bb84"

    @property
    def parameters(self) -> tuple[ParameterSpec, ...]:
        return (
            ParameterSpec("p_depol", 0.0, 0.0, MAX_FLIP, "per-basis flip parameter (Q = 2p)"),
            ParameterSpec("p_z", 0.5, 0.0, 1.0, "probability of the Z basis"),
        )

    def noise_for_error_rate(self, q: float) -> dict[str, float]:
        return flip_noise(q)

    def _build(self, **params: Any) -> ProtocolInstance:
        return bb84(**params)
