"""Twin-field QKD in its entanglement-based description, plus the PLOB benchmark.

Alice and Bob each hold ``|Φ_q⟩ = √q|00⟩ + √(1−q)|11⟩`` (vacuum / single
photon) and send the second mode through pure loss ``√η`` to Charlie, who
heralds one of the single-click outcomes with threshold detectors. The
instance state is the heralded ``AB`` state; the herald probability is folded
into ``p_pass``.
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Any

import numpy as np

from qkdfk.channels import build_sift_map, pure_loss_single_photon
from qkdfk.matqi import DensityMatrix, HermitianMatrix, kron, permute_subsystems, projector, ptrace
from qkdfk.protocols.base import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    PLOB,
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

logger = logging.getLogger(__name__)


class CharlieOutcome(str, Enum):
    PSI_MINUS = "psi-minus"
    PSI_PLUS = "psi-plus"


class KeyBasis(str, Enum):
    X = "X"
    Z = "Z"


def plob(eta: float) -> float:
    """``−log₂(1 − η)``, the repeaterless capacity of a pure-loss channel."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    return -math.log2(1.0 - eta)


def loss_db_to_eta(loss_db: float) -> float:
    """``η = 10^(−dB/10)``."""
    if loss_db < 0:
        raise ValueError(f"loss_db must be >= 0, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def charlie_povm(
    p_dark: float, outcome: CharlieOutcome | str = CharlieOutcome.PSI_MINUS
) -> HermitianMatrix:
    """``(1−p_d)²·½(|Ψ^±⟩⟨Ψ^±| + |11⟩⟨11|) + p_d(1−p_d)·I/4`` on ``A′B′``."""
    if not 0.0 <= p_dark <= 1.0:
        raise ValueError(f"p_dark must lie in [0, 1], got {p_dark}")
    sign = -1.0 if CharlieOutcome(outcome) is CharlieOutcome.PSI_MINUS else 1.0
    psi = (kron(KET_0, KET_1) + sign * kron(KET_1, KET_0)) / math.sqrt(2.0)
    click = 0.5 * (projector(psi) + projector(kron(KET_1, KET_1)))
    return (1.0 - p_dark) ** 2 * click + p_dark * (1.0 - p_dark) * np.eye(4) / 4.0


def transmitted_state(q: float, sqrt_eta: float) -> DensityMatrix:
    """``ρ′_{AA′}``: ``|Φ_q⟩`` after pure loss on the transmitted mode."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    phi = math.sqrt(q) * kron(KET_0, KET_0) + math.sqrt(1.0 - q) * kron(KET_1, KET_1)
    return pure_loss_single_photon(DensityMatrix.from_vector(phi, (2, 2)), sqrt_eta, target=1)


def heralded_state(
    q: float,
    sqrt_eta: float,
    p_dark: float,
    outcome: CharlieOutcome | str = CharlieOutcome.PSI_MINUS,
) -> tuple[HermitianMatrix, float]:
    """Unnormalized ``Tr_{A′B′}[(I ⊗ M)(ρ′_{AA′} ⊗ ρ′_{BB′})]`` and its trace."""
    single = transmitted_state(q, sqrt_eta).matrix
    joint = kron(single, single)  # A, A', B, B'
    ordered = permute_subsystems(joint, (2, 2, 2, 2), [0, 2, 1, 3])  # A, B, A', B'
    herald = kron(np.eye(4), charlie_povm(p_dark, outcome))
    post = ptrace(herald @ ordered, (2, 2, 2, 2), keep=[0, 1])
    post = 0.5 * (post + post.conj().T)
    return post, float(np.trace(post).real)


def herald_probability(
    q: float,
    sqrt_eta: float,
    p_dark: float,
    outcome: CharlieOutcome | str = CharlieOutcome.PSI_MINUS,
) -> float:
    return heralded_state(q, sqrt_eta, p_dark, outcome)[1]


def twin_field(
    q: float = 0.5,
    sqrt_eta: float = 1.0,
    p_dark: float = 0.0,
    p_z: float = 0.5,
    charlie_outcome: CharlieOutcome | str = CharlieOutcome.PSI_MINUS,
    tf_key_basis: KeyBasis | str = KeyBasis.X,
    granularity: Granularity | str = Granularity.FINE,
) -> ProtocolInstance:
    """Twin-field instance for one herald outcome.

    Key bits come from ``tf_key_basis`` rounds where both chose that basis;
    statistics of both bases constrain the state. The raw error rate is
    reported modulo Bob's relabelling of anticorrelated outcomes.
    """
    if not 0.0 <= sqrt_eta <= 1.0:
        raise ValueError(f"sqrt_eta must lie in [0, 1], got {sqrt_eta}")
    if not 0.0 <= p_z <= 1.0:
        raise ValueError(f"p_z must lie in [0, 1], got {p_z}")
    outcome = CharlieOutcome(charlie_outcome)
    key_basis = KeyBasis(tf_key_basis)
    granularity = Granularity(granularity)

    post, p_herald = heralded_state(q, sqrt_eta, p_dark, outcome)
    if p_herald <= 0.0:
        raise ValueError(
            f"Charlie never heralds {outcome.value} (q={q}, sqrt_eta={sqrt_eta}, p_dark={p_dark})"
        )
    rho = DensityMatrix(post / p_herald, (2, 2))

    p_x = 1.0 - p_z
    bases = {"Z": (p_z, (KET_0, KET_1)), "X": (p_x, (KET_PLUS, KET_MINUS))}
    alice = basis_povm(bases)
    bob = basis_povm(bases)
    weight = p_z if key_basis is KeyBasis.Z else p_x
    if weight <= 0.0:
        raise ValueError(f"Key basis {key_basis.value} is never chosen (p_z={p_z})")
    key_pair = (key_basis.value, key_basis.value)
    sift = build_sift_map(alice, bob, (key_pair,))

    tests = basis_povm(
        {"Z": (1.0, (KET_0, KET_1)), "X": (1.0, (KET_PLUS, KET_MINUS))}, complete=False
    )
    data_pairs = tuple((b, b) for b, (w, _) in bases.items() if w > 0.0)
    observables = statistics_observables(tests, tests, data_pairs, granularity)

    key_vectors = bases[key_basis.value][1]
    equal = sum(kron(projector(v), projector(v)) for v in key_vectors)
    differ = sum(
        kron(projector(v), projector(w)) for v in key_vectors for w in key_vectors if v is not w
    )
    raw = error_rate(rho, equal, differ)
    q_key = min(raw, 1.0 - raw)
    eta = sqrt_eta**2
    params: dict[str, Any] = {
        "q": q,
        "sqrt_eta": sqrt_eta,
        "p_dark": p_dark,
        "p_z": p_z,
        "charlie_outcome": outcome.value,
        "tf_key_basis": key_basis.value,
    }
    reference = ReferenceFormulas({PLOB: lambda _: plob(eta)}, q=q_key) if eta < 1.0 else None
    logger.debug("twin-field herald probability %.6e at sqrt_eta %.6g", p_herald, sqrt_eta)
    return assemble_instance(
        "twin_field",
        rho,
        sift,
        observables,
        key_error_q=q_key,
        parameters=params,
        herald_probability=p_herald,
        reference=reference,
        granularity=granularity,
    )


class TwinFieldProtocol(Protocol):
    description = "Twin-field QKD with pure loss and dark counts, heralded on one click"
    options = ("charlie_outcome", "tf_key_basis", "granularity")

    @property
    def name(self) -> str:
        return "twin_field"

    @property
    def parameters(self) -> tuple[ParameterSpec, ...]:
        return (
            ParameterSpec("q", 0.5, 0.0, 1.0, "vacuum amplitude squared of |Phi_q>"),
            ParameterSpec("sqrt_eta", 1.0, 0.0, 1.0, "transmittance of each arm"),
            ParameterSpec("p_dark", 0.0, 0.0, 1.0, "dark count probability per detector"),
            ParameterSpec("p_z", 0.5, 0.0, 1.0, "probability of the Z basis"),
        )

    def _build(self, **params: Any) -> ProtocolInstance:
        return twin_field(**params)
