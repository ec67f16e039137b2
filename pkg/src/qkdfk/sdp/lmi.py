"""Affine matrix expressions and a builder for linear-matrix-inequality programs.

A :class:`DualProgram` is written directly in "free variables + LMIs" form::

    minimize (or maximize)  c₀ + Σ_j c_j y_j
    subject to              K_k + Σ_j y_j F_jk ⪰ 0     for every registered LMI k
                            y_j ≥ 0                    for nonnegative scalars

and compiled to an :class:`SdpProblem` whose *dual* is exactly this program,
so the solver's multipliers are the program variables and
:func:`~qkdfk.sdp.certify.certify_dual` certifies the program's value.

Example::

    prog = DualProgram(Sense.MINIMIZE)
    t = prog.scalar("t")
    prog.psd("t_ge_1", (t - 1.0).as_matrix())
    prog.set_objective(t)
    problem = prog.compile()          # maximize -X s.t. X = 1 ... dual value 1
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt
import scipy.linalg

from qkdfk.matqi import hermitian_basis
from qkdfk.sdp.problem import (
    Block,
    DualRepair,
    LinearConstraint,
    Relation,
    SdpProblem,
    Sense,
)

Number = Union[int, float]


def _merge(
    idx_a: npt.NDArray, co_a: npt.NDArray, idx_b: npt.NDArray, co_b: npt.NDArray
) -> tuple[npt.NDArray, npt.NDArray]:
    if idx_a.size == 0:
        return idx_b.copy(), co_b.copy()
    if idx_b.size == 0:
        return idx_a.copy(), co_a.copy()
    idx = np.concatenate([idx_a, idx_b])
    co = np.concatenate([co_a, co_b])
    uniq, inv = np.unique(idx, return_inverse=True)
    out = np.zeros((uniq.size,) + co.shape[1:], dtype=co.dtype)
    np.add.at(out, inv, co)
    return uniq, out


@dataclass(frozen=True, eq=False)
class AffineScalar:
    """``constant + Σ_j coeffs[j]·y[index[j]]`` with real coefficients."""

    constant: float
    index: npt.NDArray[np.int_]
    coeffs: npt.NDArray[np.floating]

    @classmethod
    def const(cls, value: Number) -> AffineScalar:
        return cls(float(value), np.zeros(0, dtype=int), np.zeros(0))

    def __add__(self, other: AffineScalar | Number) -> AffineScalar:
        if not isinstance(other, AffineScalar):
            return AffineScalar(self.constant + float(other), self.index, self.coeffs)
        idx, co = _merge(self.index, self.coeffs, other.index, other.coeffs)
        return AffineScalar(self.constant + other.constant, idx, co)

    __radd__ = __add__

    def __neg__(self) -> AffineScalar:
        return AffineScalar(-self.constant, self.index, -self.coeffs)

    def __sub__(self, other: AffineScalar | Number) -> AffineScalar:
        return self + (-other)

    def __rsub__(self, other: Number) -> AffineScalar:
        return (-self) + other

    def __mul__(self, k: Number) -> AffineScalar:
        return AffineScalar(self.constant * float(k), self.index, self.coeffs * float(k))

    __rmul__ = __mul__

    def __truediv__(self, k: Number) -> AffineScalar:
        return self * (1.0 / float(k))

    def value(self, y: npt.ArrayLike) -> float:
        yv = np.asarray(y, dtype=float)
        if not self.index.size:
            return self.constant
        return self.constant + float(self.coeffs @ yv[self.index])

    def as_matrix(self) -> AffineMatrix:
        """The 1×1 matrix expression ``[[self]]``."""
        return AffineMatrix(
            np.array([[self.constant]], dtype=complex),
            self.index.copy(),
            self.coeffs.reshape(-1, 1, 1).astype(complex),
        )


@dataclass(frozen=True, eq=False)
class AffineMatrix:
    """``constant + Σ_j y[index[j]]·coeffs[j]`` with Hermitian coefficient matrices."""

    constant: npt.NDArray[np.complexfloating]
    index: npt.NDArray[np.int_]
    coeffs: npt.NDArray[np.complexfloating]

    @classmethod
    def const(cls, m: npt.ArrayLike) -> AffineMatrix:
        arr = np.asarray(m, dtype=complex)
        return cls(arr, np.zeros(0, dtype=int), np.zeros((0,) + arr.shape, dtype=complex))

    @classmethod
    def zeros(cls, dim: int) -> AffineMatrix:
        return cls.const(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(
            np.max(np.abs(self.constant.imag), initial=0.0) == 0.0
            and np.max(np.abs(self.coeffs.imag), initial=0.0) == 0.0
        )

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: AffineMatrix | npt.ArrayLike) -> AffineMatrix:
        if not isinstance(other, AffineMatrix):
            return AffineMatrix(self.constant + np.asarray(other), self.index, self.coeffs)
        if other.dim != self.dim:
            raise ValueError(f"Cannot add {self.dim}- and {other.dim}-dim expressions")
        idx, co = _merge(self.index, self.coeffs, other.index, other.coeffs)
        return AffineMatrix(self.constant + other.constant, idx, co)

    __radd__ = __add__

    def __neg__(self) -> AffineMatrix:
        return AffineMatrix(-self.constant, self.index, -self.coeffs)

    def __sub__(self, other: AffineMatrix | npt.ArrayLike) -> AffineMatrix:
        return self + (-other if isinstance(other, AffineMatrix) else -np.asarray(other))

    def __rsub__(self, other: npt.ArrayLike) -> AffineMatrix:
        return (-self) + other

    def __mul__(self, k: Number) -> AffineMatrix:
        return AffineMatrix(self.constant * k, self.index, self.coeffs * k)

    __rmul__ = __mul__

    def conj(self) -> AffineMatrix:
        return AffineMatrix(self.constant.conj(), self.index, self.coeffs.conj())

    def congruence(self, k: npt.ArrayLike) -> AffineMatrix:
        """``K E K†`` (``K`` may be rectangular)."""
        km = np.asarray(k, dtype=complex)
        kd = km.conj().T
        return AffineMatrix(km @ self.constant @ kd, self.index, km[None] @ self.coeffs @ kd[None])

    def congruence_sum(self, kraus: Sequence[npt.ArrayLike]) -> AffineMatrix:
        """``Σ_K K E K†``."""
        out: AffineMatrix | None = None
        for k in kraus:
            term = self.congruence(k)
            out = term if out is None else out + term
        if out is None:
            raise ValueError("congruence_sum needs at least one operator")
        return out

    def pinch(self, projectors: Sequence[npt.ArrayLike]) -> AffineMatrix:
        return self.congruence_sum(projectors)

    def kron_left(self, left: npt.ArrayLike) -> AffineMatrix:
        """``L ⊗ E``."""
        lm = np.asarray(left, dtype=complex)
        co = np.einsum("ab,pij->paibj", lm, self.coeffs).reshape(
            self.coeffs.shape[0], lm.shape[0] * self.dim, lm.shape[1] * self.dim
        )
        return AffineMatrix(np.kron(lm, self.constant), self.index, co)

    def kron_right(self, right: npt.ArrayLike) -> AffineMatrix:
        """``E ⊗ R``."""
        rm = np.asarray(right, dtype=complex)
        co = np.einsum("pij,ab->piajb", self.coeffs, rm).reshape(
            self.coeffs.shape[0], self.dim * rm.shape[0], self.dim * rm.shape[1]
        )
        return AffineMatrix(np.kron(self.constant, rm), self.index, co)

    def trace(self) -> AffineScalar:
        return AffineScalar(
            float(np.trace(self.constant).real),
            self.index.copy(),
            np.real(np.trace(self.coeffs, axis1=1, axis2=2)),
        )

    def inner(self, m: npt.ArrayLike) -> AffineScalar:
        """``Tr(M E)`` for a Hermitian ``M``."""
        mm = np.asarray(m, dtype=complex)
        return AffineScalar(
            float(np.real(np.vdot(mm, self.constant))),
            self.index.copy(),
            np.real(np.einsum("ij,pij->p", mm.conj(), self.coeffs)),
        )

    def quad(self, vec: npt.ArrayLike) -> AffineScalar:
        """``⟨v|E|v⟩``."""
        v = np.asarray(vec, dtype=complex).reshape(-1)
        return self.inner(np.outer(v, v.conj()))

    def column(self, vec: npt.ArrayLike) -> AffineColumn:
        """``E|v⟩`` as an affine column for :func:`bmat`."""
        v = np.asarray(vec, dtype=complex).reshape(-1)
        return AffineColumn(self.constant @ v, self.index, self.coeffs @ v)

    def value(self, y: npt.ArrayLike) -> npt.NDArray[np.complexfloating]:
        yv = np.asarray(y, dtype=float)
        if self.index.size == 0:
            return self.constant.copy()
        return self.constant + np.tensordot(yv[self.index], self.coeffs, axes=1)


@dataclass(frozen=True, eq=False)
class AffineColumn:
    constant: npt.NDArray[np.complexfloating]
    index: npt.NDArray[np.int_]
    coeffs: npt.NDArray[np.complexfloating]


Entry = Union[AffineMatrix, AffineScalar, AffineColumn, npt.NDArray, None]


def bmat(rows: Sequence[Sequence[Entry]]) -> AffineMatrix:
    """Assemble a Hermitian block expression.

    Only the diagonal and the blocks *below* it are read; the upper blocks are
    filled with their adjoints. ``None`` is a zero block. A scalar on the
    diagonal is a 1×1 block; an :class:`AffineColumn` below the diagonal is a
    column block.
    """
    n = len(rows)
    sizes = []
    for i in range(n):
        d = rows[i][i]
        if isinstance(d, AffineScalar):
            sizes.append(1)
        elif isinstance(d, AffineMatrix):
            sizes.append(d.dim)
        else:
            sizes.append(np.asarray(d).shape[0])
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    total = int(offsets[-1])

    pieces: list[tuple[int, int, AffineMatrix | AffineColumn | AffineScalar | npt.NDArray]] = []
    for i in range(n):
        for j in range(i + 1):
            e = rows[i][j]
            if e is not None:
                pieces.append((i, j, e))

    all_idx = [p[2].index for p in pieces if hasattr(p[2], "index")]
    index = np.unique(np.concatenate(all_idx)) if all_idx else np.zeros(0, dtype=int)
    constant = np.zeros((total, total), dtype=complex)
    coeffs = np.zeros((index.size, total, total), dtype=complex)

    def place(i: int, j: int, const: npt.NDArray, idx: npt.NDArray, co: npt.NDArray) -> None:
        r0, r1 = offsets[i], offsets[i + 1]
        c0, c1 = offsets[j], offsets[j + 1]
        const = const.reshape(r1 - r0, c1 - c0)
        co = co.reshape(-1, r1 - r0, c1 - c0)
        constant[r0:r1, c0:c1] += const
        if i != j:
            constant[c0:c1, r0:r1] += const.conj().T
        if idx.size:
            pos = np.searchsorted(index, idx)
            coeffs[pos, r0:r1, c0:c1] += co
            if i != j:
                coeffs[pos, c0:c1, r0:r1] += co.conj().transpose(0, 2, 1)

    for i, j, e in pieces:
        if isinstance(e, (AffineMatrix, AffineColumn)):
            place(i, j, e.constant, e.index, e.coeffs)
        elif isinstance(e, AffineScalar):
            place(i, j, np.array(e.constant, dtype=complex), e.index, e.coeffs.astype(complex))
        else:
            place(i, j, np.asarray(e, dtype=complex), np.zeros(0, dtype=int), np.zeros(0))
    return AffineMatrix(constant, index, coeffs)


@dataclass
class _Lmi:
    name: str
    expr: AffineMatrix


class DualProgram:
    """Builder for LMI programs that compile to :class:`SdpProblem`.

    Variable indices are handed out in creation order and are the constraint
    indices of the compiled problem.
    """

    def __init__(self, sense: Sense = Sense.MINIMIZE, name: str = "") -> None:
        self.sense = sense
        self.name = name
        self._n = 0
        self._nonneg: list[bool] = []
        self._names: dict[str, npt.NDArray[np.int_]] = {}
        self._lmis: list[_Lmi] = []
        self._objective: AffineScalar = AffineScalar.const(0.0)
        self._repairs: list[DualRepair] = []

    @property
    def num_variables(self) -> int:
        return self._n

    def _allocate(self, name: str, count: int, nonneg: bool) -> npt.NDArray[np.int_]:
        if name in self._names:
            raise ValueError(f"Variable {name!r} already declared")
        idx = np.arange(self._n, self._n + count)
        self._n += count
        self._nonneg.extend([nonneg] * count)
        self._names[name] = idx
        return idx

    def indices(self, name: str) -> npt.NDArray[np.int_]:
        return self._names[name]

    def scalar(self, name: str, nonneg: bool = False) -> AffineScalar:
        idx = self._allocate(name, 1, nonneg)
        return AffineScalar(0.0, idx, np.ones(1))

    def hermitian(self, name: str, dim: int, real: bool = False) -> AffineMatrix:
        """Free ``dim × dim`` Hermitian (or real symmetric) matrix variable."""
        basis = hermitian_basis(dim, real=real)
        idx = self._allocate(name, basis.shape[0], False)
        return AffineMatrix(np.zeros((dim, dim), dtype=complex), idx, basis)

    def affine_hermitian(
        self,
        name: str,
        dim: int,
        equalities: Sequence[tuple[npt.ArrayLike, float]],
        real: bool = False,
        tol: float = 1e-9,
    ) -> AffineMatrix:
        """Hermitian matrix variable restricted to ``Tr(A_i M) = a_i``.

        The constraints are eliminated: ``M = M₀ + Σ_j y_j N_j`` with ``N_j`` an
        orthonormal basis of the solution directions. Raises ``ValueError``
        when the equalities are inconsistent.
        """
        basis = hermitian_basis(dim, real=real)
        if equalities:
            rows = np.array(
                [
                    np.real(np.einsum("ij,pij->p", np.asarray(a).conj(), basis))
                    for a, _ in equalities
                ]
            )
            rhs = np.array([float(v) for _, v in equalities])
            coef0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
            residual = float(np.max(np.abs(rows @ coef0 - rhs)))
            if residual > tol:
                raise ValueError(
                    f"Equality constraints on {name!r} are inconsistent (residual {residual:.3e})"
                )
            null = scipy.linalg.null_space(rows, rcond=1e-10)
        else:
            coef0 = np.zeros(basis.shape[0])
            null = np.eye(basis.shape[0])
        constant = np.tensordot(coef0, basis, axes=1)
        coeffs = np.tensordot(null.T, basis, axes=1)
        idx = self._allocate(name, coeffs.shape[0], False)
        return AffineMatrix(constant, idx, coeffs)

    def psd(self, name: str, expr: AffineMatrix | AffineScalar) -> None:
        """Register ``expr ⪰ 0`` under a block name."""
        mat = expr.as_matrix() if isinstance(expr, AffineScalar) else expr
        if any(l.name == name for l in self._lmis):
            raise ValueError(f"LMI {name!r} already registered")
        if mat.index.size and mat.index.max() >= self._n:
            raise ValueError(f"LMI {name!r} uses an undeclared variable")
        self._lmis.append(_Lmi(name, mat))

    def set_objective(self, expr: AffineScalar | Number) -> None:
        self._objective = expr if isinstance(expr, AffineScalar) else AffineScalar.const(expr)

    def repair(
        self, targets: Sequence[str], direction: Mapping[int, float], label: str = ""
    ) -> None:
        """Declare a variable direction that adds ``+I`` per unit to each target LMI."""
        self._repairs.append(DualRepair(tuple(targets), dict(direction), label))

    def compile(self) -> SdpProblem:
        """Problem in block form whose dual is this program.

        A minimizing program becomes ``maximize ⟨−K, X⟩ s.t. ⟨F_j, X⟩ = c_j``
        (``≤`` for nonnegative variables); a maximizing one becomes
        ``minimize ⟨K, X⟩ s.t. ⟨−F_j, X⟩ = c_j`` (``≥`` for nonnegative
        variables). In both cases the dual slack of block k is the LMI
        expression itself.
        """
        if not self._lmis:
            raise ValueError("DualProgram has no LMI constraints")
        n = self._n
        c = np.zeros(n)
        if self._objective.index.size:
            np.add.at(c, self._objective.index, self._objective.coeffs)
        minimize = self.sense is Sense.MINIMIZE
        sign = 1.0 if minimize else -1.0
        coefficients: list[dict[str, npt.NDArray]] = [{} for _ in range(n)]
        blocks: list[Block] = []
        objective: dict[str, npt.NDArray] = {}
        for lmi in self._lmis:
            e = lmi.expr
            blocks.append(Block(lmi.name, e.dim))
            objective[lmi.name] = -sign * e.constant
            for p, j in enumerate(e.index):
                coefficients[int(j)][lmi.name] = sign * e.coeffs[p]
        relation_nonneg = Relation.LE if minimize else Relation.GE
        constraints = []
        for j in range(n):
            if not coefficients[j]:
                raise ValueError(f"Variable {j} appears in no LMI; the program is unbounded")
            constraints.append(
                LinearConstraint(
                    coefficients[j],
                    relation_nonneg if self._nonneg[j] else Relation.EQ,
                    float(c[j]),
                )
            )
        return SdpProblem(
            blocks=blocks,
            objective=objective,
            constraints=constraints,
            sense=Sense.MAXIMIZE if minimize else Sense.MINIMIZE,
            offset=self._objective.constant,
            repairs=tuple(self._repairs),
            name=self.name,
        )
