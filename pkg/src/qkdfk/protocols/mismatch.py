"""BB84 with detector-efficiency mismatch; Bob's system is a qutrit with a vacuum level."""

from __future__ import annotations

from typing import Any

import numpy as np

from qkdfk.channels import Povm, build_sift_map
from qkdfk.matqi import DensityMatrix, binary_entropy, kron
from qkdfk.protocols.base import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    RATE_PER_SIFTED,
    Granularity,
    ParameterSpec,
    Protocol,
    ProtocolInstance,
    ReferenceFormulas,
    assemble_instance,
    basis_povm,
    error_rate,
    statistics_observables,
)
from qkdfk.protocols.bb84 import BB84_KEEP, MAX_FLIP, depolarized_bell_pair, flip_noise

# qubit -> qutrit, the third level is the vacuum |∅⟩
_EMBED = np.eye(3, 2, dtype=complex)


def mismatch_formula(q: float, eta0: float, eta1: float) -> float:
    """``min(η₀, η₁)[1 − h₂(Q)] − h₂(Q)`` per basis-matched signal."""
    h = binary_entropy(q)
    return min(eta0, eta1) * (1.0 - h) - h


def bob_povm(p_z: float, eta0: float, eta1: float) -> Povm:
    """Click elements ``p_b·η_v|v⟩⟨v|`` plus the no-click completion ``M_B^∅``."""
    p_x = 1.0 - p_z
    clicks = basis_povm(
        {"Z": (1.0, (KET_0, KET_1)), "X": (1.0, (KET_PLUS, KET_MINUS))}, dim=3, complete=False
    )
    scale = {("Z", 0): p_z * eta0, ("Z", 1): p_z * eta1, ("X", 0): p_x * eta0, ("X", 1): p_x * eta1}
    labelled = [
        (e.announcement, e.value, scale[(e.announcement, e.value)] * e.operator)
        for e in clicks.elements
    ]
    no_click = np.eye(3, dtype=complex) - sum(op for _, _, op in labelled)
    labelled.append(("none", 0, no_click))
    return Povm.from_operators(labelled)


def bb84_mismatch(
    p_depol: float = 0.0,
    p_z: float = 0.5,
    eta0: float = 1.0,
    eta1: float = 1.0,
    granularity: Granularity | str = Granularity.COARSE,
) -> ProtocolInstance:
    """Entanglement-based BB84 where Bob's ``0`` and ``1`` detectors have efficiencies ``η₀, η₁``.

    Constraints are the four coarse-grained click probabilities ``C_Z, C_X,
    E_Z, E_X`` with Alice's test projectors unweighted and Bob's click
    elements as measured.
    """
    for label, value in (("eta0", eta0), ("eta1", eta1), ("p_z", p_z)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{label} must lie in [0, 1], got {value}")
    granularity = Granularity(granularity)
    qubits = depolarized_bell_pair(p_depol)
    lift = kron(np.eye(2), _EMBED)
    rho = DensityMatrix(lift @ qubits.matrix @ lift.conj().T, (2, 3))

    p_x = 1.0 - p_z
    bases = {"Z": (KET_0, KET_1), "X": (KET_PLUS, KET_MINUS)}
    alice = basis_povm({"Z": (p_z, bases["Z"]), "X": (p_x, bases["X"])})
    bob = bob_povm(p_z, eta0, eta1)
    weights = {"Z": p_z, "X": p_x}
    keep = tuple(pair for pair in BB84_KEEP if weights[pair[0]] > 0.0)
    sift = build_sift_map(alice, bob, keep)

    tests = basis_povm({"Z": (1.0, bases["Z"]), "X": (1.0, bases["X"])}, complete=False)
    observables = statistics_observables(tests, bob, keep, granularity)

    coarse = statistics_observables(tests, bob, keep, Granularity.COARSE)
    by_name = {o.name: o.operator for o in coarse}
    key = keep[0][0]
    q = error_rate(rho, by_name[f"C_{key}"], by_name[f"E_{key}"])
    params: dict[str, Any] = {"p_depol": p_depol, "p_z": p_z, "eta0": eta0, "eta1": eta1}
    return assemble_instance(
        "bb84_mismatch",
        rho,
        sift,
        observables,
        key_error_q=q,
        parameters=params,
        reference=ReferenceFormulas(
            {RATE_PER_SIFTED: lambda x: mismatch_formula(x, eta0, eta1)}, q=q
        ),
        granularity=granularity,
    )


class MismatchProtocol(Protocol):
    description = "BB84 with detector-efficiency mismatch (qutrit Bob)"
    options = ("granularity",)

    @property
    def name(self) -> str:
        return "bb84_mismatch"

    @property
    def parameters(self) -> tuple[ParameterSpec, ...]:
        return (
            ParameterSpec("p_depol", 0.0, 0.0, MAX_FLIP, "per-basis flip parameter (Q = 2p)"),
            ParameterSpec("p_z", 0.5, 0.0, 1.0, "probability of the Z basis"),
            ParameterSpec("eta0", 1.0, 0.0, 1.0, "efficiency of the bit-0 detector"),
            ParameterSpec("eta1", 1.0, 0.0, 1.0, "efficiency of the bit-1 detector"),
        )

    def noise_for_error_rate(self, q: float) -> dict[str, float]:
        return flip_noise(q)

    def _build(self, **params: Any) -> ProtocolInstance:
        return bb84_mismatch(**params)
