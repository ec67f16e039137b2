"""Quantum channels, POVMs and the announcement / postselection / key-map machinery.

A :class:`SiftMap` is the trace non-increasing map ``ρ ↦ Π A(ρ) Π`` that models
public announcements followed by postselection. It is stored as a list of
weighted blocks so that protocols whose announcements make the sifted state
block diagonal never materialize the announcement registers:

- **dilated**: one block on the full register space ``A ⊗ A_b ⊗ A_v ⊗ B ⊗ B_b``.
- **single-kraus**: one block, one Kraus operator.
- **block-diagonal**: one block per kept announcement pair, weights carried
  as scalars.

The key map always reads Alice's value register; Bob's value register is
never built (its contribution to the key/Eve marginal is reproduced exactly by
``√(Σ_v M_B^(b,v))``).
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt
import scipy.linalg

from qkdfk.constraints import Observable
from qkdfk.matqi import (
    DensityMatrix,
    HermitianMatrix,
    as_matrix,
    eig_hermitian,
    embed_operator,
    hermitian,
    hermitian_basis,
    kron,
    ket,
    permute_subsystems,
    ptrace,
    sqrtm_psd,
)

logger = logging.getLogger(__name__)

POVM_TOL = 1e-10
KRAUS_TOL = 1e-9
PROJECTOR_TOL = 1e-9


# ---------------------------------------------------------------------------
# POVMs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PovmElement:
    announcement: str
    """Publicly announced part of the outcome (basis, pass/fail, ...)."""

    value: int
    """Private part of the outcome; for Alice this is the raw key symbol."""

    operator: HermitianMatrix


@dataclass(frozen=True, eq=False)
class Povm:
    """Measurement whose outcomes are labelled ``(announcement, value)``.

    ``complete=False`` skips the ``Σ M = I`` check for sub-measurements that a
    caller completes later (e.g. before adding a no-click element).
    """

    elements: tuple[PovmElement, ...]
    complete: bool = True

    def __post_init__(self) -> None:
        elems = tuple(self.elements)
        if not elems:
            raise ValueError("A POVM needs at least one element")
        dim = elems[0].operator.shape[0]
        fixed = []
        seen: set[tuple[str, int]] = set()
        for e in elems:
            op = hermitian(e.operator)
            if op.shape[0] != dim:
                raise ValueError(f"POVM element {e.announcement}/{e.value} has wrong dimension")
            lam = float(np.linalg.eigvalsh(op)[0])
            if lam < -POVM_TOL:
                raise ValueError(
                    f"POVM element {e.announcement}/{e.value} is not PSD (eigenvalue {lam:.3e})"
                )
            key = (e.announcement, e.value)
            if key in seen:
                raise ValueError(f"Duplicate POVM label {key}")
            seen.add(key)
            fixed.append(PovmElement(e.announcement, e.value, op))
        if self.complete:
            total = sum(e.operator for e in fixed)
            err = float(np.max(np.abs(total - np.eye(dim))))
            if err > POVM_TOL:
                raise ValueError(f"POVM elements do not sum to identity (max error {err:.3e})")
        object.__setattr__(self, "elements", tuple(fixed))

    @classmethod
    def from_operators(
        cls, labelled: Iterable[tuple[str, int, npt.ArrayLike]], complete: bool = True
    ) -> Povm:
        return cls(
            tuple(PovmElement(a, v, np.asarray(m, dtype=complex)) for a, v, m in labelled),
            complete=complete,
        )

    @property
    def dim(self) -> int:
        return self.elements[0].operator.shape[0]

    @property
    def announcements(self) -> list[str]:
        out: list[str] = []
        for e in self.elements:
            if e.announcement not in out:
                out.append(e.announcement)
        return out

    def for_announcement(self, announcement: str) -> list[PovmElement]:
        items = [e for e in self.elements if e.announcement == announcement]
        if not items:
            raise ValueError(f"Unknown announcement {announcement!r}")
        return items

    def announcement_operator(self, announcement: str) -> HermitianMatrix:
        return sum(e.operator for e in self.for_announcement(announcement))

    def completeness_error(self) -> float:
        total = sum(e.operator for e in self.elements)
        return float(np.max(np.abs(total - np.eye(self.dim))))


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


class ChannelKind(str, Enum):
    DEPOLARIZING = "depolarizing"
    PURE_LOSS = "pure-loss"
    COMPOSED = "composed"


@dataclass(frozen=True)
class ChannelSpec:
    """Declarative description of a channel acting on one subsystem."""

    kind: ChannelKind
    target: int = 0
    p: float = 0.0
    """Depolarizing probability."""

    sqrt_eta: float = 1.0
    """Amplitude transmittance ``η^{1/2}`` of a pure-loss channel."""

    parts: tuple[ChannelSpec, ...] = field(default_factory=tuple)
    """Channels applied in order for ``COMPOSED``."""

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Depolarizing probability must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.sqrt_eta <= 1.0:
            raise ValueError(f"sqrt_eta must lie in [0, 1], got {self.sqrt_eta}")
        if self.kind is ChannelKind.COMPOSED and not self.parts:
            raise ValueError("A composed channel needs at least one part")

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        if self.kind is ChannelKind.DEPOLARIZING:
            return depolarize(rho, self.p, self.target)
        if self.kind is ChannelKind.PURE_LOSS:
            return pure_loss_single_photon(rho, self.sqrt_eta, self.target)
        for part in self.parts:
            rho = part.apply(rho)
        return rho


def _check_target(rho: DensityMatrix, target: int) -> None:
    if not 0 <= target < len(rho.dims):
        raise ValueError(f"Target subsystem {target} out of range for dims {rho.dims}")
    if rho.dims[target] != 2:
        raise ValueError(
            f"Target subsystem {target} has dimension {rho.dims[target]}, expected a qubit"
        )


def apply_kraus(m: npt.ArrayLike, kraus: Iterable[npt.ArrayLike]) -> HermitianMatrix:
    """``Σ_K K m K†`` for an arbitrary operator ``m``."""
    arr = np.asarray(m, dtype=complex)
    out = None
    for k in kraus:
        k = np.asarray(k, dtype=complex)
        term = k @ arr @ k.conj().T
        out = term if out is None else out + term
    if out is None:
        raise ValueError("apply_kraus needs at least one Kraus operator")
    return out


def depolarize(rho: DensityMatrix, p: float, target: int) -> DensityMatrix:
    """``(1−p)ρ + p·Tr_target(ρ) ⊗ I/2`` on the qubit ``target``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Depolarizing probability must lie in [0, 1], got {p}")
    _check_target(rho, target)
    if p == 0.0:
        return rho
    paulis = (
        np.eye(2),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]]),
    )
    weights = (np.sqrt(1.0 - 3.0 * p / 4.0),) + (np.sqrt(p / 4.0),) * 3
    kraus = [w * embed_operator(s, rho.dims, target) for w, s in zip(weights, paulis)]
    return DensityMatrix(apply_kraus(rho.matrix, kraus), rho.dims)


def beamsplitter_unitary(t: float) -> HermitianMatrix:
    """Single-excitation beamsplitter on (signal, ancilla) modes in the ``{|0⟩,|1⟩}²`` basis.

    ``|10⟩ → √t|10⟩ + √(1−t)|01⟩`` and ``|01⟩ → −√(1−t)|10⟩ + √t|01⟩``; the
    vacuum and the (unphysical here) ``|11⟩`` component are left alone.
    """
    c, s = np.sqrt(t), np.sqrt(1.0 - t)
    u = np.eye(4, dtype=complex)
    # basis order |00>, |01>, |10>, |11> with the signal mode first
    u[2, 2], u[1, 2] = c, s
    u[2, 1], u[1, 1] = -s, c
    return u


def pure_loss_single_photon(rho: DensityMatrix, sqrt_eta: float, target: int) -> DensityMatrix:
    """Pure loss on a ``{vacuum, one photon}`` mode with transmittance ``t = sqrt_eta``.

    The mode is dilated with a vacuum ancilla, mixed on a beamsplitter and the
    ancilla is traced out.
    """
    if not 0.0 <= sqrt_eta <= 1.0:
        raise ValueError(f"sqrt_eta must lie in [0, 1], got {sqrt_eta}")
    _check_target(rho, target)
    dims = rho.dims + (2,)
    anc = len(rho.dims)
    dilated = kron(rho.matrix, np.diag([1.0, 0.0]))
    # bring (target, ancilla) next to each other at the end
    order = [i for i in range(len(dims)) if i not in (target, anc)] + [target, anc]
    moved = permute_subsystems(dilated, dims, order)
    u = kron(np.eye(moved.shape[0] // 4), beamsplitter_unitary(sqrt_eta))
    mixed = u @ moved @ u.conj().T
    moved_dims = tuple(dims[i] for i in order)
    reduced = ptrace(mixed, moved_dims, keep=range(len(moved_dims) - 1))
    # restore the original order of the remaining subsystems
    inverse = [order[:-1].index(i) for i in range(len(rho.dims))]
    restored = permute_subsystems(reduced, moved_dims[:-1], inverse)
    return DensityMatrix(hermitian(restored), rho.dims)


# ---------------------------------------------------------------------------
# Pinching
# ---------------------------------------------------------------------------


def check_projector_family(projectors: Sequence[npt.ArrayLike], tol: float = PROJECTOR_TOL) -> None:
    """Raise ``ValueError`` unless the operators are orthogonal projectors summing to I."""
    if not projectors:
        raise ValueError("Projector family is empty")
    mats = [np.asarray(p, dtype=complex) for p in projectors]
    dim = mats[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for i, p in enumerate(mats):
        if p.shape != (dim, dim):
            raise ValueError("Projectors have inconsistent shapes")
        if np.max(np.abs(p @ p - p)) > tol or np.max(np.abs(p - p.conj().T)) > tol:
            raise ValueError(f"Operator {i} is not an orthogonal projector")
        for j in range(i):
            if np.max(np.abs(p @ mats[j])) > tol:
                raise ValueError(f"Projectors {j} and {i} are not mutually orthogonal")
        total += p
    if np.max(np.abs(total - np.eye(dim))) > tol:
        raise ValueError("Projectors do not sum to the identity")


def pinch(rho: object, projectors: Sequence[npt.ArrayLike]) -> HermitianMatrix:
    """Pinching channel ``Σ_j P_j ρ P_j``."""
    check_projector_family(projectors)
    m = as_matrix(rho)
    return sum(np.asarray(p) @ m @ np.asarray(p) for p in projectors)


def _pinch_unchecked(m: npt.NDArray, projectors: Sequence[npt.NDArray]) -> npt.NDArray:
    return sum(p @ m @ p for p in projectors)


# ---------------------------------------------------------------------------
# Sift map
# ---------------------------------------------------------------------------


class SiftMode(str, Enum):
    DILATED = "dilated"
    SINGLE_KRAUS = "single-kraus"
    BLOCK_DIAGONAL = "block-diagonal"


@dataclass(frozen=True, eq=False)
class SiftBlock:
    """One diagonal block ``w·Σ_K K ρ K†`` of the sifted state with its key map."""

    weight: float
    kraus: tuple[npt.NDArray[np.complexfloating], ...]
    key_projectors: tuple[HermitianMatrix, ...]
    projector: HermitianMatrix | None = None
    """Postselection projector Π on the block output (dilated mode only)."""

    label: str = ""

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"Sift block weight must be >= 0, got {self.weight}")
        kraus = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not kraus:
            raise ValueError("Sift block needs at least one Kraus operator")
        out_dim, in_dim = kraus[0].shape
        if any(k.shape != (out_dim, in_dim) for k in kraus):
            raise ValueError("Kraus operators of a block must share one shape")
        if self.projector is not None:
            proj = np.asarray(self.projector, dtype=complex)
            if np.max(np.abs(proj @ proj - proj)) > PROJECTOR_TOL:
                raise ValueError("Postselection operator is not a projector")
            kraus = tuple(proj @ k for k in kraus)
        check_projector_family(self.key_projectors)
        if self.key_projectors[0].shape[0] != out_dim:
            raise ValueError("Key projectors do not act on the block output space")
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(
            self, "key_projectors", tuple(np.asarray(p, dtype=complex) for p in self.key_projectors)
        )

    @property
    def input_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def is_real(self) -> bool:
        return all(np.max(np.abs(np.imag(k)), initial=0.0) < 1e-14 for k in self.kraus) and all(
            np.max(np.abs(np.imag(p)), initial=0.0) < 1e-14 for p in self.key_projectors
        )

    def forward(self, m: npt.ArrayLike) -> HermitianMatrix:
        """Unweighted ``Σ_K K m K†``."""
        return apply_kraus(m, self.kraus)

    def adjoint(self, sigma: npt.ArrayLike) -> HermitianMatrix:
        """Unweighted ``Σ_K K† σ K``."""
        return apply_kraus(sigma, (k.conj().T for k in self.kraus))

    def pinch(self, m: npt.ArrayLike) -> HermitianMatrix:
        return _pinch_unchecked(np.asarray(m, dtype=complex), self.key_projectors)

    def kraus_gram(self) -> HermitianMatrix:
        return sum(k.conj().T @ k for k in self.kraus)


@dataclass(frozen=True, eq=False)
class SiftMap:
    blocks: tuple[SiftBlock, ...]
    mode: SiftMode

    def __post_init__(self) -> None:
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("SiftMap needs at least one block")
        if len({b.input_dim for b in blocks}) != 1:
            raise ValueError("Sift blocks disagree on the input dimension")
        gram = sum(b.weight * b.kraus_gram() for b in blocks)
        top = float(np.linalg.eigvalsh(hermitian(gram))[-1])
        if top > 1.0 + KRAUS_TOL:
            raise ValueError(f"Sift map is trace increasing (‖Σ K†K‖ = {top:.6f})")
        if self.mode is SiftMode.SINGLE_KRAUS and (len(blocks) != 1 or len(blocks[0].kraus) != 1):
            raise ValueError("single-kraus mode needs exactly one block with one Kraus operator")
        object.__setattr__(self, "blocks", blocks)

    @property
    def input_dim(self) -> int:
        return self.blocks[0].input_dim

    @property
    def output_dims(self) -> list[int]:
        return [b.output_dim for b in self.blocks]

    @property
    def is_real(self) -> bool:
        return all(b.is_real for b in self.blocks)

    @classmethod
    def identity(cls, dim: int, key_projectors: Sequence[npt.ArrayLike]) -> SiftMap:
        block = SiftBlock(1.0, (np.eye(dim, dtype=complex),), tuple(key_projectors), label="all")
        return cls((block,), SiftMode.SINGLE_KRAUS)

    def pass_operator(self) -> HermitianMatrix:
        """``S†(I)``, whose expectation on ρ is ``p_pass``."""
        return hermitian(sum(b.weight * b.kraus_gram() for b in self.blocks))


@dataclass(frozen=True, eq=False)
class SiftedState:
    """Sub-normalized sifted state ``S(ρ)`` kept as its diagonal blocks."""

    blocks: tuple[HermitianMatrix, ...]

    @property
    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks))

    def to_matrix(self) -> HermitianMatrix:
        return scipy.linalg.block_diag(*self.blocks)


def sift_apply(sift: SiftMap, rho: object) -> tuple[SiftedState, float]:
    """Apply ``S`` and return the sifted blocks together with ``p_pass = Tr S(ρ)``."""
    m = as_matrix(rho)
    if m.shape[0] != sift.input_dim:
        raise ValueError(f"State dimension {m.shape[0]} does not match sift input {sift.input_dim}")
    blocks = tuple(b.weight * b.forward(m) for b in sift.blocks)
    state = SiftedState(blocks)
    return state, state.trace


def sift_adjoint(sift: SiftMap, sigma: npt.ArrayLike | Sequence[npt.ArrayLike]) -> HermitianMatrix:
    """``S†(σ)``; only the diagonal blocks of a full ``σ`` contribute."""
    if isinstance(sigma, (list, tuple)):
        parts = [np.asarray(s, dtype=complex) for s in sigma]
        if len(parts) != len(sift.blocks):
            raise ValueError(f"Expected {len(sift.blocks)} blocks, got {len(parts)}")
    else:
        full = np.asarray(sigma, dtype=complex)
        total = sum(sift.output_dims)
        if full.shape != (total, total):
            raise ValueError(f"sigma has shape {full.shape}, expected ({total}, {total})")
        parts, start = [], 0
        for d in sift.output_dims:
            parts.append(full[start : start + d, start : start + d])
            start += d
    out = np.zeros((sift.input_dim, sift.input_dim), dtype=complex)
    for block, part in zip(sift.blocks, parts):
        if part.shape != (block.output_dim, block.output_dim):
            raise ValueError(f"Block {block.label!r} expects a {block.output_dim}-dim operator")
        out += block.weight * block.adjoint(part)
    return out


def _split_projector_family(
    elements: Sequence[PovmElement], tol: float = PROJECTOR_TOL
) -> tuple[float, list[tuple[int, npt.NDArray]]] | None:
    """Write ``M_v = p·P_v`` with orthogonal projectors ``P_v``.

    Returns ``(p, [(value, basis of range(P_v)), ...])`` or ``None`` when the
    elements do not have that shape.
    """
    tops = [float(np.linalg.eigvalsh(e.operator)[-1]) for e in elements]
    p = max(tops)
    if p <= tol:
        return None
    ranges = []
    for e in elements:
        proj = e.operator / p
        if np.max(np.abs(proj @ proj - proj)) > tol:
            return None
        basis = scipy.linalg.orth(proj, rcond=1e-9)
        ranges.append((e.value, basis))
    stacked = np.hstack([b for _, b in ranges])
    if np.max(np.abs(stacked.conj().T @ stacked - np.eye(stacked.shape[1]))) > tol:
        return None
    return p, ranges


def _compressed_block(
    alice: Povm, bob: Povm, pair: tuple[str, str]
) -> SiftBlock | None:
    a_ann, b_ann = pair
    split = _split_projector_family(alice.for_announcement(a_ann))
    if split is None:
        return None
    p_a, ranges = split
    values = sorted({v for v, _ in ranges})
    # V maps A onto the span of the P_v ranges, grouped by key value
    rows = []
    row_values = []
    for v in values:
        for value, basis in ranges:
            if value == v:
                rows.append(basis.conj().T)
                row_values.extend([v] * basis.shape[1])
    iso = np.vstack(rows)
    bob_total = bob.announcement_operator(b_ann)
    s_b = float(np.linalg.eigvalsh(bob_total)[-1])
    if s_b <= KRAUS_TOL:
        return None
    b_bar = sqrtm_psd(bob_total / s_b)
    kraus = kron(iso, b_bar)
    dim_b = bob.dim
    key_projectors = []
    for v in values:
        diag = np.array([1.0 if rv == v else 0.0 for rv in row_values])
        key_projectors.append(kron(np.diag(diag), np.eye(dim_b)))
    return SiftBlock(
        weight=p_a * s_b,
        kraus=(kraus,),
        key_projectors=tuple(key_projectors),
        label=f"{a_ann}/{b_ann}",
    )


def _dilated_map(alice: Povm, bob: Povm, keep: Sequence[tuple[str, str]]) -> SiftMap:
    a_anns, b_anns = alice.announcements, bob.announcements
    a_values = sorted({e.value for e in alice.elements})
    n_ab, n_av, n_bb = len(a_anns), len(a_values), len(b_anns)
    d_a, d_b = alice.dim, bob.dim

    def alice_kraus(a_ann: str) -> npt.NDArray:
        out = np.zeros((d_a * n_ab * n_av, d_a), dtype=complex)
        for e in alice.for_announcement(a_ann):
            reg = kron(ket(a_anns.index(a_ann), n_ab), ket(a_values.index(e.value), n_av))
            out += kron(sqrtm_psd(e.operator), reg.reshape(-1, 1))
        return out

    def bob_kraus(b_ann: str) -> npt.NDArray:
        reg = ket(b_anns.index(b_ann), n_bb).reshape(-1, 1)
        return kron(sqrtm_psd(bob.announcement_operator(b_ann)), reg)

    kraus = tuple(kron(alice_kraus(a), bob_kraus(b)) for a, b in keep)
    proj = sum(
        kron(
            np.eye(d_a),
            np.diag(ket(a_anns.index(a), n_ab).real),
            np.eye(n_av),
            np.eye(d_b),
            np.diag(ket(b_anns.index(b), n_bb).real),
        )
        for a, b in keep
    )
    key_projectors = tuple(
        kron(np.eye(d_a * n_ab), np.diag(ket(j, n_av).real), np.eye(d_b * n_bb))
        for j in range(n_av)
    )
    block = SiftBlock(1.0, kraus, key_projectors, projector=proj, label="dilated")
    return SiftMap((block,), SiftMode.DILATED)


def build_sift_map(
    alice: Povm,
    bob: Povm,
    keep: Iterable[tuple[str, str]],
    dilate: bool = False,
) -> SiftMap:
    """Announcement + postselection map for the kept ``(alice, bob)`` announcement pairs.

    The key symbol is Alice's element value. Unless ``dilate`` is set, each
    kept pair whose Alice elements are scaled orthogonal projectors becomes a
    compressed block; otherwise the full register construction is used.
    """
    pairs = list(dict.fromkeys(tuple(k) for k in keep))
    if not pairs:
        raise ValueError("keep must name at least one announcement pair")
    for a, b in pairs:
        if a not in alice.announcements:
            raise ValueError(f"Unknown Alice announcement {a!r}")
        if b not in bob.announcements:
            raise ValueError(f"Unknown Bob announcement {b!r}")
    if not dilate:
        blocks = [_compressed_block(alice, bob, pair) for pair in pairs]
        if all(b is not None for b in blocks):
            kept = tuple(b for b in blocks if b is not None and b.weight > 0)
            if kept:
                mode = (
                    SiftMode.SINGLE_KRAUS
                    if len(kept) == 1 and len(kept[0].kraus) == 1
                    else SiftMode.BLOCK_DIAGONAL
                )
                logger.debug("Sift map: %s with %d block(s)", mode.value, len(kept))
                return SiftMap(kept, mode)
        logger.info("Announcement structure does not compress; using the dilated sift map")
    return _dilated_map(alice, bob, pairs)


# ---------------------------------------------------------------------------
# Constraint observables
# ---------------------------------------------------------------------------


def _pair_suffix(a: str, b: str) -> str:
    return a if a == b else f"{a}{b}"


def coarse_grain(alice: Povm, bob: Povm, keep: Iterable[tuple[str, str]]) -> list[Observable]:
    """Equal-values and differing-values observables for each kept announcement pair."""
    out: list[Observable] = []
    for a, b in dict.fromkeys(tuple(k) for k in keep):
        equal = np.zeros((alice.dim * bob.dim,) * 2, dtype=complex)
        differ = np.zeros_like(equal)
        for ea in alice.for_announcement(a):
            for eb in bob.for_announcement(b):
                term = kron(ea.operator, eb.operator)
                if ea.value == eb.value:
                    equal += term
                else:
                    differ += term
        suffix = _pair_suffix(a, b)
        out.append(Observable(f"C_{suffix}", equal))
        out.append(Observable(f"E_{suffix}", differ))
    return out


def fine_grain(alice: Povm, bob: Povm, keep: Iterable[tuple[str, str]]) -> list[Observable]:
    """One observable ``M_A^a ⊗ M_B^b`` per pair of elements in the kept announcements."""
    out: list[Observable] = []
    for a, b in dict.fromkeys(tuple(k) for k in keep):
        elems_a = alice.for_announcement(a)
        elems_b = bob.for_announcement(b)
        outcomes = max(2, len(elems_a) * len(elems_b))
        for ea in elems_a:
            for eb in elems_b:
                out.append(
                    Observable(
                        f"P_{a}{ea.value}_{b}{eb.value}",
                        kron(ea.operator, eb.operator),
                        outcomes=outcomes,
                    )
                )
    return out


def source_constraints(
    rho_a: npt.ArrayLike, dims: Sequence[int], complete: bool = True
) -> list[Observable]:
    """Observables pinning Alice's reduced state on the first subsystem of ``dims``.

    The spectral projectors of ``rho_a`` always come first; ``complete=True``
    adds an orthonormal Hermitian basis of the off-spectral directions so the
    whole marginal is fixed.
    """
    m = hermitian(rho_a)
    d_a, rest = dims[0], int(np.prod(dims[1:]))
    if m.shape[0] != d_a:
        raise ValueError(f"rho_A is {m.shape[0]}-dim, expected {d_a}")
    spec = eig_hermitian(m)
    groups: list[list[int]] = []
    for i, lam in enumerate(spec.eigenvalues):
        if groups and abs(lam - spec.eigenvalues[groups[-1][-1]]) < 1e-9:
            groups[-1].append(i)
        else:
            groups.append([i])
    ident = np.eye(rest)
    out: list[Observable] = []
    for j, idx in enumerate(groups):
        vecs = spec.eigenvectors[:, idx]
        projector = kron(vecs @ vecs.conj().T, ident)
        out.append(Observable(f"Omega_A[{j}]", projector, statistical=False))
    if complete:
        # basis elements in the eigenbasis of rho_A, diagonal ones dropped (already covered)
        v = spec.eigenvectors
        basis = hermitian_basis(d_a)[d_a:]
        for j, b in enumerate(basis):
            out.append(
                Observable(f"Tomo_A[{j}]", kron(v @ b @ v.conj().T, ident), statistical=False)
            )
    return out
