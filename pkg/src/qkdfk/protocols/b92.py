"""B92 with two non-orthogonal signal states and unambiguous-discrimination sifting."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from qkdfk.channels import build_sift_map, depolarize, source_constraints
from qkdfk.constraints import Observable
from qkdfk.matqi import DensityMatrix, kron, projector, ptrace
from qkdfk.protocols.base import (
    KET_0,
    KET_1,
    Granularity,
    ParameterSpec,
    Protocol,
    ProtocolInstance,
    assemble_instance,
    basis_povm,
    error_rate,
    statistics_observables,
)

THETA_TOL = 1e-9


def signal_states(theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``|φ₀⟩, |φ₁⟩`` with overlap ``cos(θ/2)`` and their orthogonal complements."""
    c, s = math.cos(theta / 4.0), math.sin(theta / 4.0)
    phi0 = np.array([c, s], dtype=complex)
    phi1 = np.array([c, -s], dtype=complex)
    bar0 = np.array([-s, c], dtype=complex)
    bar1 = np.array([s, c], dtype=complex)
    return phi0, phi1, bar0, bar1


def b92(
    theta: float,
    p_depol: float = 0.0,
    granularity: Granularity | str = Granularity.COARSE,
    source_tomography: bool = False,
) -> ProtocolInstance:
    """B92 at Bloch angle ``theta`` (radians) between the signal states.

    Bob passes when he sees ``|φ̄₀⟩`` (bit 1) or ``|φ̄₁⟩`` (bit 0). The noise is
    the depolarizing channel ``(1−p)ρ + p·I/2`` on Bob's qubit. Alice's
    marginal enters through its spectral projectors, and through a full
    tomographic set when ``source_tomography`` is set.
    """
    if not THETA_TOL < theta < math.pi - THETA_TOL:
        raise ValueError(f"theta must lie strictly inside (0, pi), got {theta}")
    granularity = Granularity(granularity)
    phi0, phi1, bar0, bar1 = signal_states(theta)
    psi = (kron(KET_0, phi0) + kron(KET_1, phi1)) / math.sqrt(2.0)
    rho = depolarize(DensityMatrix.from_vector(psi, (2, 2)), p_depol, target=1)

    alice = basis_povm({"key": (1.0, (KET_0, KET_1))})
    bob = basis_povm(
        {"pass": (0.5, (bar1, bar0))},
        extra=[("fail", 0, 0.5 * (projector(phi0) + projector(phi1)))],
    )
    keep = (("key", "pass"),)
    sift = build_sift_map(alice, bob, keep)

    # unit-weight pass elements: Γ^(=) pairs Alice's 0 with φ̄₁ and 1 with φ̄₀
    tests = basis_povm({"pass": (1.0, (bar1, bar0))}, complete=False)
    equal_op = kron(projector(KET_0), projector(bar1)) + kron(projector(KET_1), projector(bar0))
    differ_op = kron(projector(KET_0), projector(bar0)) + kron(projector(KET_1), projector(bar1))
    if granularity is Granularity.FINE:
        observables = statistics_observables(alice, tests, keep, granularity)
    else:
        observables = [Observable("Gamma_eq", equal_op), Observable("Gamma_neq", differ_op)]

    rho_a = ptrace(rho.matrix, (2, 2), keep=[0])
    observables += source_constraints(rho_a, (2, 2), complete=source_tomography)
    params: dict[str, Any] = {"theta": theta, "p_depol": p_depol}
    return assemble_instance(
        "b92",
        rho,
        sift,
        observables,
        key_error_q=error_rate(rho, equal_op, differ_op),
        parameters=params,
        granularity=granularity,
    )


class B92Protocol(Protocol):
    description = "B92 with depolarizing noise and source constraints"
    options = ("granularity", "source_tomography")

    @property
    def name(self) -> str:
        return "b92"

    @property
    def parameters(self) -> tuple[ParameterSpec, ...]:
        return (
            ParameterSpec(
                "theta", math.pi / 2, THETA_TOL, math.pi - THETA_TOL, "Bloch angle (rad)"
            ),
            ParameterSpec(
                "p_depol", 0.0, 0.0, 1.0, "mixing weight of (1-p)rho + p I/2 (not the BB84 flip p)"
            ),
        )

    def _build(self, **params: Any) -> ProtocolInstance:
        return b92(**params)
