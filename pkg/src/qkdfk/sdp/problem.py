"""Standard-form SDP data types.

The primal works on named PSD blocks::

    minimize / maximize   Σ_k ⟨C_k, X_k⟩ + offset
    subject to            Σ_k ⟨A_jk, X_k⟩  {=, ≤, ≥}  b_j      X_k ⪰ 0

Its dual is the linear matrix inequality program in the multipliers ``y``:

- minimize:  maximize ``bᵀy`` s.t. ``C_k − Σ_j y_j A_jk ⪰ 0`` (a lower bound)
- maximize:  minimize ``bᵀy`` s.t. ``Σ_j y_j A_jk − C_k ⪰ 0`` (an upper bound)

with ``y_j`` sign-restricted on inequality rows (see :meth:`SdpProblem.multiplier_sign`).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from qkdfk.matqi import hermitian


class SolverError(RuntimeError):
    """Raised when a solve or certificate cannot be trusted."""

    def __init__(self, message: str, status: SolveStatus | None = None) -> None:
        super().__init__(message)
        self.status = status


class Sense(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Relation(str, Enum):
    EQ = "="
    LE = "<="
    GE = ">="


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near-optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


class BoundDirection(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class Block:
    name: str
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"Block {self.name!r} needs a positive dimension")


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """``Σ_k ⟨A_jk, X_k⟩ relation bound``; blocks missing from ``coefficients`` have zero A."""

    coefficients: Mapping[str, npt.NDArray]
    relation: Relation
    bound: float
    name: str = ""


@dataclass(frozen=True, eq=False)
class DualRepair:
    """A multiplier direction that adds ``+I`` per unit step to every slack in ``targets``.

    ``certify_dual`` applies repairs in declaration order, each by the smallest
    step that makes its target slacks PSD.
    """

    targets: tuple[str, ...]
    direction: Mapping[int, float]
    label: str = ""


@dataclass(eq=False)
class SdpProblem:
    blocks: list[Block]
    objective: dict[str, npt.NDArray]
    constraints: list[LinearConstraint]
    sense: Sense = Sense.MINIMIZE
    offset: float = 0.0
    repairs: tuple[DualRepair, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValueError("An SDP needs at least one block")
        dims = {}
        for b in self.blocks:
            if b.name in dims:
                raise ValueError(f"Duplicate block name {b.name!r}")
            dims[b.name] = b.dim
        self.objective = {
            k: self._check(k, v, dims, "objective") for k, v in self.objective.items()
        }
        fixed = []
        for j, con in enumerate(self.constraints):
            coeffs = {
                k: self._check(k, v, dims, f"constraint {j}") for k, v in con.coefficients.items()
            }
            if not math.isfinite(con.bound):
                raise ValueError(f"Constraint {j} has a non-finite bound")
            relation = Relation(con.relation)
            fixed.append(LinearConstraint(coeffs, relation, float(con.bound), con.name))
        self.constraints = fixed
        for rep in self.repairs:
            for t in rep.targets:
                if t not in dims:
                    raise ValueError(f"Repair targets unknown block {t!r}")
            for j in rep.direction:
                if not 0 <= j < len(fixed):
                    raise ValueError(f"Repair direction references constraint {j}")

    @staticmethod
    def _check(name: str, mat: npt.ArrayLike, dims: Mapping[str, int], where: str) -> npt.NDArray:
        if name not in dims:
            raise ValueError(f"{where} references unknown block {name!r}")
        arr = hermitian(mat)
        if arr.shape[0] != dims[name]:
            raise ValueError(
                f"{where}: block {name!r} expects {dims[name]}x{dims[name]}, got {arr.shape}"
            )
        if np.max(np.abs(arr.imag), initial=0.0) == 0.0:
            return arr.real.copy()
        return arr

    # -- accessors ----------------------------------------------------------

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def bound_direction(self) -> BoundDirection:
        return BoundDirection.LOWER if self.sense is Sense.MINIMIZE else BoundDirection.UPPER

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def rhs(self) -> npt.NDArray[np.floating]:
        return np.array([c.bound for c in self.constraints], dtype=float)

    def multiplier_sign(self, j: int) -> int:
        """+1 when ``y_j ≥ 0`` is required, −1 for ``y_j ≤ 0``, 0 when free."""
        rel = self.constraints[j].relation
        if rel is Relation.EQ:
            return 0
        positive = Relation.GE if self.sense is Sense.MINIMIZE else Relation.LE
        return 1 if rel is positive else -1

    def multiplier_signs(self) -> npt.NDArray[np.int_]:
        return np.array([self.multiplier_sign(j) for j in range(self.num_constraints)], dtype=int)

    # -- evaluation ---------------------------------------------------------

    def primal_objective(self, x: Mapping[str, npt.ArrayLike]) -> float:
        total = self.offset
        for name, c in self.objective.items():
            total += float(np.real(np.vdot(c, np.asarray(x[name]))))
        return total

    def constraint_values(self, x: Mapping[str, npt.ArrayLike]) -> npt.NDArray[np.floating]:
        def value(con: LinearConstraint) -> float:
            return sum(
                float(np.real(np.vdot(a, np.asarray(x[k])))) for k, a in con.coefficients.items()
            )

        return np.array([value(con) for con in self.constraints])

    def primal_violation(self, x: Mapping[str, npt.ArrayLike]) -> float:
        """Largest violation of a linear row or of a block's PSD condition."""
        worst = 0.0
        for con, val in zip(self.constraints, self.constraint_values(x)):
            if con.relation is Relation.EQ:
                worst = max(worst, abs(val - con.bound))
            elif con.relation is Relation.GE:
                worst = max(worst, con.bound - val)
            else:
                worst = max(worst, val - con.bound)
        for b in self.blocks:
            lam = float(np.linalg.eigvalsh(np.asarray(x[b.name]))[0])
            worst = max(worst, -lam)
        return worst

    def dual_slacks(self, y: npt.ArrayLike) -> dict[str, npt.NDArray]:
        """``C_k − Σ y_j A_jk`` (minimize) or ``Σ y_j A_jk − C_k`` (maximize)."""
        yv = np.asarray(y, dtype=float)
        sums: dict[str, npt.NDArray] = {
            b.name: np.zeros((b.dim, b.dim), dtype=complex) for b in self.blocks
        }
        for j, con in enumerate(self.constraints):
            if yv[j] == 0.0:
                continue
            for k, a in con.coefficients.items():
                sums[k] = sums[k] + yv[j] * a
        out = {}
        for b in self.blocks:
            c = self.objective.get(b.name, np.zeros((b.dim, b.dim)))
            s = c - sums[b.name] if self.sense is Sense.MINIMIZE else sums[b.name] - c
            out[b.name] = (s + s.conj().T) / 2
        return out

    def dual_objective(self, y: npt.ArrayLike) -> float:
        return float(self.rhs() @ np.asarray(y, dtype=float)) + self.offset


@dataclass(frozen=True, eq=False)
class SdpSolution:
    primal_blocks: dict[str, npt.NDArray]
    dual_multipliers: npt.NDArray[np.floating]
    primal_value: float
    dual_value: float
    status: SolveStatus
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    message: str = ""
    certified: bool = False
    """Set once :func:`~qkdfk.sdp.certify.certify_dual` has rounded the dual point."""

    @property
    def gap(self) -> float:
        return abs(self.primal_value - self.dual_value)

    @property
    def ok(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.NEAR_OPTIMAL)


@dataclass(frozen=True)
class CertifiedBound:
    """Objective value of a dual point that satisfies every dual constraint exactly."""

    value: float
    direction: BoundDirection
    psd_residual: float = 0.0
    """Largest PSD violation left after rounding (0 by construction)."""

    linear_residual: float = 0.0
    raw_psd_violation: float = 0.0
    """PSD violation of the solver's dual point before rounding."""

    shift: float = 0.0
    """Total step taken along the repair directions."""

    multipliers: npt.NDArray[np.floating] | None = field(default=None, repr=False, compare=False)
    """The rounded dual point."""

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "direction": self.direction.value,
            "psd_residual": self.psd_residual,
            "linear_residual": self.linear_residual,
            "raw_psd_violation": self.raw_psd_violation,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class SlaterReport:
    """Outcome of the strict-feasibility probe."""

    strictly_feasible: bool
    infeasible: bool
    margin: float
    """Optimal ``t`` of the probe: the slack every PSD block and inequality can share."""

    status: SolveStatus
    message: str = ""
    point: dict[str, npt.NDArray] = field(default_factory=dict)

    @property
    def strong_duality_expected(self) -> bool:
        return self.strictly_feasible


# ---------------------------------------------------------------------------
# Sparse text dump
# ---------------------------------------------------------------------------


def dump_sdpa(problem: SdpProblem, path: str | Path) -> Path:
    """Write ``problem`` in a sparse SDPA-like text layout.

    Header: constraint count, block count, block sizes, right-hand side. Then one line
    ``constraint block row col value`` per upper-triangle nonzero, where
    constraint 0 is the objective. Complex entries are written as
    ``re+imj``. Relations and sense are recorded as comment lines.
    """
    out = Path(path)
    lines = [
        f'"{problem.name or "qkdfk"} sense={problem.sense.value} offset={problem.offset!r}"',
        f"{problem.num_constraints} = mDIM",
        f"{len(problem.blocks)} = nBLOCK",
        " ".join(str(b.dim) for b in problem.blocks) + " = bLOCKsTRUCT",
        " ".join(repr(c.bound) for c in problem.constraints),
    ]
    lines.append("* relations: " + " ".join(c.relation.value for c in problem.constraints))
    index = {b.name: i + 1 for i, b in enumerate(problem.blocks)}

    def emit(j: int, block: str, mat: npt.NDArray) -> None:
        rows, cols = np.nonzero(np.triu(np.abs(mat) > 0))
        for r, c in zip(rows, cols):
            v = mat[r, c]
            text = repr(float(v.real)) if np.isrealobj(mat) or v.imag == 0 else f"{v!r}"
            lines.append(f"{j} {index[block]} {r + 1} {c + 1} {text}")

    for name, c in problem.objective.items():
        emit(0, name, c)
    for j, con in enumerate(problem.constraints, start=1):
        for name, a in con.coefficients.items():
            emit(j, name, a)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out
