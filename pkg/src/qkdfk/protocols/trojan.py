"""Prepare-and-measure BB84 with a Trojan-horse side channel on Alice's phase modulator.

Eve's back-reflected coherent state ``|±√μ⟩`` (Z) or ``|±i√μ⟩`` (X) is
correlated with each signal; Alice's four-level source register ``A`` keeps
track of what she sent, and its reduced state is known exactly.
"""

from __future__ import annotations

import cmath
import math
from typing import Any

import numpy as np

from qkdfk.channels import build_sift_map, depolarize, source_constraints
from qkdfk.matqi import DensityMatrix, HermitianMatrix, ket
from qkdfk.protocols.base import (
    Granularity,
    ParameterSpec,
    Protocol,
    ProtocolInstance,
    assemble_instance,
    basis_povm,
    error_rate,
    statistics_observables,
)
from qkdfk.protocols.bb84 import BB84_KEEP, MAX_FLIP, flip_mixing, flip_noise

# Bob's qubit: |0⟩ = one photon in the leading pulse, |1⟩ = one photon in the trailing pulse
Z_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
Z_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
X_PLUS = np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0)
X_MINUS = np.array([1.0, -1.0j], dtype=complex) / math.sqrt(2.0)


def kappa(p_z: float, mu_out: float) -> complex:
    """``¼(1−i)√(p_Z p_X)·exp(−μ_out(1+i))``."""
    return 0.25 * (1 - 1j) * math.sqrt(p_z * (1.0 - p_z)) * cmath.exp(-mu_out * (1 + 1j))


def source_state(p_z: float, mu_out: float) -> HermitianMatrix:
    """Alice's reduced state ``ρ_A`` under the attack."""
    k = kappa(p_z, mu_out)
    kc = k.conjugate()
    p_x = 1.0 - p_z
    return np.array(
        [
            [p_z / 2, 0, k, kc],
            [0, p_z / 2, kc, k],
            [kc, k, p_x / 2, 0],
            [k, kc, 0, p_x / 2],
        ],
        dtype=complex,
    )


def joint_state(p_z: float, mu_out: float) -> HermitianMatrix:
    """``Tr_E |ψ⟩⟨ψ|_{ABE}`` from the overlaps of Eve's coherent states."""
    if mu_out < 0:
        raise ValueError(f"mu_out must be >= 0, got {mu_out}")
    amp_z = math.sqrt(p_z / 2.0)
    amp_x = math.sqrt((1.0 - p_z) / 2.0)
    root = math.sqrt(mu_out)
    branches = [
        (amp_z, Z_PLUS, root),
        (amp_z, Z_MINUS, -root),
        (amp_x, X_PLUS, 1j * root),
        (amp_x, X_MINUS, -1j * root),
    ]
    rho = np.zeros((8, 8), dtype=complex)
    for j, (cj, bj, aj) in enumerate(branches):
        vj = np.kron(ket(j, 4), bj)
        for k, (ck, bk, ak) in enumerate(branches):
            vk = np.kron(ket(k, 4), bk)
            overlap = cmath.exp(-mu_out + np.conj(ak) * aj)  # ⟨a_k|a_j⟩
            rho += cj * ck * overlap * np.outer(vj, vk.conj())
    return 0.5 * (rho + rho.conj().T)


def trojan_bb84(
    p_depol: float = 0.0,
    p_z: float = 0.5,
    mu_out: float = 0.0,
    granularity: Granularity | str = Granularity.COARSE,
) -> ProtocolInstance:
    """Trojan-horse BB84 with four coarse-grained constraints and a tomographic source."""
    if not 0.0 < p_z < 1.0:
        raise ValueError(f"p_z must lie in (0, 1), got {p_z}")
    granularity = Granularity(granularity)
    source = DensityMatrix(joint_state(p_z, mu_out), (4, 2))
    rho = depolarize(source, flip_mixing(p_depol), target=1)

    p_x = 1.0 - p_z
    alice = basis_povm({"Z": (1.0, (ket(0, 4), ket(1, 4))), "X": (1.0, (ket(2, 4), ket(3, 4)))})
    bob = basis_povm({"Z": (p_z, (Z_PLUS, Z_MINUS)), "X": (p_x, (X_PLUS, X_MINUS))})
    sift = build_sift_map(alice, bob, BB84_KEEP)

    observables = statistics_observables(alice, bob, BB84_KEEP, granularity)
    coarse = {
        o.name: o.operator
        for o in statistics_observables(alice, bob, BB84_KEEP, Granularity.COARSE)
    }
    q = error_rate(rho, coarse["C_Z"], coarse["E_Z"])

    observables += source_constraints(source_state(p_z, mu_out), (4, 2), complete=True)
    params: dict[str, Any] = {"p_depol": p_depol, "p_z": p_z, "mu_out": mu_out}
    return assemble_instance(
        "trojan_bb84",
        rho,
        sift,
        observables,
        key_error_q=q,
        parameters=params,
        granularity=granularity,
    )


class TrojanProtocol(Protocol):
    description = "Prepare-and-measure BB84 under a Trojan-horse attack"
    options = ("granularity",)

    @property
    def name(self) -> str:
        return "trojan_bb84"

    @property
    def parameters(self) -> tuple[ParameterSpec, ...]:
        return (
            ParameterSpec("p_depol", 0.0, 0.0, MAX_FLIP, "per-basis flip parameter (Q = 2p)"),
            ParameterSpec("p_z", 0.5, 1e-6, 1.0 - 1e-6, "probability of the Z basis"),
            ParameterSpec("mu_out", 0.0, 0.0, 50.0, "mean back-reflected photon number"),
        )

    def noise_for_error_rate(self, q: float) -> dict[str, float]:
        return flip_noise(q)

    def _build(self, **params: Any) -> ProtocolInstance:
        return trojan_bb84(**params)
