"""Dense Hermitian linear algebra and quantum-information primitives.

Everything here works on plain ``numpy`` arrays. :class:`DensityMatrix` is the
only wrapper type; it carries the subsystem dimensions that
:func:`partial_trace` and the channels need.

Example::

    from qkdfk.matqi import DensityMatrix, ket, kron, partial_trace

    phi = (kron(ket(0, 2), ket(0, 2)) + kron(ket(1, 2), ket(1, 2))) / np.sqrt(2)
    rho = DensityMatrix.from_vector(phi, dims=(2, 2))
    partial_trace(rho, keep=[0]).matrix   # I/2
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np
import numpy.typing as npt

HermitianMatrix = npt.NDArray[np.complexfloating]
"""Square complex array with ``m == m.conj().T`` (within 1e-12 after :func:`hermitian`)."""

HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
DEFAULT_EPS_PERT = 1e-10


def hermitian(m: npt.ArrayLike, tol: float = HERMITIAN_TOL) -> HermitianMatrix:
    """Validate *m* as Hermitian and return its symmetrized copy ``(m + m†)/2``.

    Raises ``ValueError`` for non-square input or an anti-Hermitian part larger
    than ``tol`` relative to the matrix scale.
    """
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"Expected a non-empty square matrix, got shape {arr.shape}")
    skew = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
    scale = max(1.0, float(np.max(np.abs(arr))))
    if skew > tol * scale:
        raise ValueError(f"Matrix is not Hermitian (max |M - M†| = {skew:.3e})")
    return (arr + arr.conj().T) / 2


def is_real(m: npt.ArrayLike, tol: float = 1e-14) -> bool:
    """True when the imaginary part of *m* is negligible."""
    arr = np.asarray(m)
    if not np.iscomplexobj(arr):
        return True
    return bool(np.max(np.abs(arr.imag), initial=0.0) <= tol)


# ---------------------------------------------------------------------------
# States and vectors
# ---------------------------------------------------------------------------


def ket(index: int, dim: int) -> npt.NDArray[np.complexfloating]:
    """Computational basis vector ``|index⟩`` in dimension *dim*."""
    if not 0 <= index < dim:
        raise ValueError(f"Basis index {index} out of range for dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: npt.ArrayLike) -> HermitianMatrix:
    """Rank-one projector ``|v⟩⟨v|`` (no normalization applied)."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def identity_vec(n: int) -> npt.NDArray[np.complexfloating]:
    """Column-stacked identity ``|e⟩ = Σ_i |i⟩|i⟩`` of length ``n²``."""
    if n < 1:
        raise ValueError(f"identity_vec needs n >= 1, got {n}")
    return np.eye(n, dtype=complex).reshape(-1)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace PSD operator with labelled subsystem dimensions."""

    matrix: HermitianMatrix
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        m = hermitian(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims) or math.prod(dims) != m.shape[0]:
            raise ValueError(f"Subsystem dims {dims} do not match matrix dimension {m.shape[0]}")
        trace = float(np.trace(m).real)
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"Density matrix trace is {trace!r}, expected 1")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -PSD_TOL:
            raise ValueError(f"Density matrix has negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, vec: npt.ArrayLike, dims: Sequence[int]) -> DensityMatrix:
        v = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(projector(v / np.linalg.norm(v)), tuple(dims))

    @classmethod
    def from_operator(cls, m: npt.ArrayLike, dims: Sequence[int]) -> DensityMatrix:
        """Normalize a nonzero PSD operator to unit trace."""
        arr = hermitian(m)
        trace = float(np.trace(arr).real)
        if trace <= 0:
            raise ValueError("Cannot normalize an operator with non-positive trace")
        return cls(arr / trace, tuple(dims))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> DensityMatrix:
        d = math.prod(dims)
        return cls(np.eye(d, dtype=complex) / d, tuple(dims))

    def expectation(self, observable: npt.ArrayLike) -> float:
        return float(np.real(np.vdot(np.asarray(observable).conj().T, self.matrix)))


def as_matrix(rho: DensityMatrix | npt.ArrayLike) -> HermitianMatrix:
    """Return the underlying array of a :class:`DensityMatrix` or array-like."""
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


# ---------------------------------------------------------------------------
# Tensor structure
# ---------------------------------------------------------------------------


def kron(*ops: npt.ArrayLike) -> npt.NDArray[np.complexfloating]:
    """Kronecker product with the first factor outermost."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def ptrace(m: npt.ArrayLike, dims: Sequence[int], keep: Iterable[int]) -> npt.NDArray:
    """Partial trace of an arbitrary operator on ``⊗ dims``, keeping *keep*.

    Kept subsystems stay in their original order.
    """
    arr = np.asarray(m, dtype=complex)
    dims = tuple(dims)
    keep_sorted = sorted(set(keep))
    if not keep_sorted:
        raise ValueError("keep must name at least one subsystem")
    if keep_sorted[0] < 0 or keep_sorted[-1] >= len(dims):
        raise ValueError(f"Subsystem index out of range for dims {dims}: {keep_sorted}")
    n = len(dims)
    tensor = arr.reshape(dims + dims)
    # einsum labels: row indices a.., column indices A..; traced pairs share a label
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = [letters[n + i] if i in keep_sorted else letters[i] for i in range(n)]
    out = [rows[i] for i in keep_sorted] + [cols[i] for i in keep_sorted]
    expr = "".join(rows) + "".join(cols) + "->" + "".join(out)
    reduced = np.einsum(expr, tensor)
    d_keep = math.prod(dims[i] for i in keep_sorted)
    return reduced.reshape(d_keep, d_keep)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the subsystems in *keep* (original order preserved)."""
    keep_sorted = sorted(set(keep))
    reduced = ptrace(rho.matrix, rho.dims, keep_sorted)
    return DensityMatrix(reduced, tuple(rho.dims[i] for i in keep_sorted))


def permute_subsystems(
    m: npt.ArrayLike, dims: Sequence[int], order: Sequence[int]
) -> npt.NDArray[np.complexfloating]:
    """Reorder the tensor factors of an operator: new factor ``k`` is old ``order[k]``."""
    arr = np.asarray(m, dtype=complex)
    dims = tuple(dims)
    n = len(dims)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of {n} subsystems")
    tensor = arr.reshape(dims + dims)
    perm = list(order) + [n + i for i in order]
    d = math.prod(dims)
    return tensor.transpose(perm).reshape(d, d)


def embed_operator(
    op: npt.ArrayLike, dims: Sequence[int], target: int
) -> npt.NDArray[np.complexfloating]:
    """Lift a single-subsystem operator to ``I ⊗ .. ⊗ op ⊗ .. ⊗ I``."""
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[target] = np.asarray(op, dtype=complex)
    return kron(*factors)


# ---------------------------------------------------------------------------
# Spectral tools
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition ``M = V diag(λ) V†`` with ascending eigenvalues."""

    eigenvalues: npt.NDArray[np.floating]
    eigenvectors: npt.NDArray[np.complexfloating]

    def reconstruct(self) -> HermitianMatrix:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def apply(self, fn: Callable[[npt.NDArray[np.floating]], npt.NDArray]) -> HermitianMatrix:
        v = self.eigenvectors
        return (v * fn(self.eigenvalues)) @ v.conj().T


def eig_hermitian(m: npt.ArrayLike) -> Spectrum:
    """LAPACK ``heevd`` eigen-decomposition of a Hermitian matrix."""
    h = hermitian(m)
    w, v = np.linalg.eigh(h)
    return Spectrum(eigenvalues=w, eigenvectors=v)


def sqrtm_psd(m: npt.ArrayLike) -> HermitianMatrix:
    """Principal square root of a PSD matrix; eigenvalues clamped at zero."""
    return eig_hermitian(m).apply(lambda w: np.sqrt(np.clip(w, 0.0, None)))


def mat_log2_regularized(m: npt.ArrayLike, eps_pert: float = DEFAULT_EPS_PERT) -> HermitianMatrix:
    """``log₂((1 − ε)·m + ε·I/dim)`` through the spectral decomposition.

    ``eps_pert = 0`` is accepted for full-rank input.
    """
    if not 0.0 <= eps_pert <= 1e-6:
        raise ValueError(f"eps_pert must lie in [0, 1e-6], got {eps_pert}")
    h = hermitian(m)
    dim = h.shape[0]
    spec = eig_hermitian(h)
    w = (1.0 - eps_pert) * spec.eigenvalues + eps_pert / dim
    if w[0] < -PSD_TOL:
        raise ValueError(f"Matrix logarithm of a non-PSD matrix (eigenvalue {w[0]:.3e})")
    floor = np.finfo(float).tiny
    return spec.apply(lambda _: np.log2(np.maximum(w, floor)))


def relative_entropy(
    rho: npt.ArrayLike, sigma: npt.ArrayLike, eps_pert: float = DEFAULT_EPS_PERT
) -> float:
    """``Tr ρ log₂ρ − Tr ρ log₂σ`` in bits; ρ and σ need not be normalized."""
    r = hermitian(rho)
    s = hermitian(sigma)
    value = np.vdot(r, mat_log2_regularized(r, eps_pert) - mat_log2_regularized(s, eps_pert))
    return float(np.real(value))


def fidelity_oracle(p: npt.ArrayLike, q: npt.ArrayLike) -> float:
    """Uhlmann fidelity ``(Tr √(√p q √p))²`` by spectral square roots."""
    hp = hermitian(p)
    hq = hermitian(q)
    for name, mat in (("p", hp), ("q", hq)):
        lam = float(np.linalg.eigvalsh(mat)[0])
        if lam < -PSD_TOL:
            raise ValueError(f"fidelity_oracle: {name} is not PSD (eigenvalue {lam:.3e})")
    root_p = sqrtm_psd(hp)
    inner = np.linalg.eigvalsh(hermitian(root_p @ hq @ root_p))
    return float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)


def binary_entropy(x: float) -> float:
    """``h₂(x) = −x log₂x − (1−x) log₂(1−x)`` with ``0·log 0 = 0``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument must lie in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def min_eigenvalue(m: npt.ArrayLike) -> float:
    return float(np.linalg.eigvalsh(np.asarray(m))[0])


def hermitian_basis(dim: int, real: bool = False) -> npt.NDArray[np.complexfloating]:
    """Orthonormal (Hilbert-Schmidt) basis of ``dim × dim`` Hermitian matrices.

    With ``real=True`` only the real symmetric part of the basis is returned.
    Shape ``(count, dim, dim)``; ``count = dim²`` or ``dim(dim+1)/2``.
    """
    mats = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        mats.append(e)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = inv_sqrt2
            mats.append(e)
    if not real:
        for i in range(dim):
            for j in range(i + 1, dim):
                e = np.zeros((dim, dim), dtype=complex)
                e[i, j] = -1j * inv_sqrt2
                e[j, i] = 1j * inv_sqrt2
                mats.append(e)
    return np.array(mats)
