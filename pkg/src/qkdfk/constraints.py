"""Expectation-value constraints ``γ^LB ≤ Tr(ρ Γ_i) ≤ γ^UB`` on the joint state."""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace

import numpy as np

from qkdfk.matqi import HermitianMatrix, as_matrix, hermitian

BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Observable:
    """A named measurement operator whose expectation has not been assigned yet."""

    name: str
    operator: HermitianMatrix
    outcomes: int = 2
    statistical: bool = True


@dataclass(frozen=True, eq=False)
class Constraint:
    """One observable together with its simulated value and admissible interval."""

    name: str
    """Short label, e.g. ``E_Z`` or ``Omega_A[1]``."""

    observable: HermitianMatrix
    """Hermitian operator Γ_i on the joint space."""

    gamma: float
    """Simulated (or observed) expectation value."""

    lower: float
    upper: float

    statistical: bool = True
    """``False`` for source constraints whose value is known exactly."""

    outcomes: int = 2
    """Number of outcomes ``d`` used in the deviation bound."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "observable", hermitian(self.observable))
        if self.lower > self.upper + BOUND_TOL:
            raise ValueError(
                f"Constraint {self.name!r}: lower bound {self.lower} exceeds upper {self.upper}"
            )
        if self.outcomes < 2:
            raise ValueError(f"Constraint {self.name!r}: outcomes must be >= 2")

    @property
    def is_tight(self) -> bool:
        return self.upper - self.lower <= BOUND_TOL

    def value(self, rho: object) -> float:
        """``Tr(ρ Γ)`` for a density matrix or raw operator."""
        return float(np.real(np.vdot(self.observable, as_matrix(rho))))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Ordered collection of constraints on a ``dim``-dimensional joint state."""

    constraints: tuple[Constraint, ...] = field(default_factory=tuple)
    dim: int = 0

    def __post_init__(self) -> None:
        items = tuple(self.constraints)
        dims = {c.observable.shape[0] for c in items}
        if len(dims) > 1:
            raise ValueError(f"Constraint observables have mixed dimensions {sorted(dims)}")
        dim = self.dim or (dims.pop() if dims else 0)
        if dim < 1:
            raise ValueError("ConstraintSet needs a positive dimension")
        if items and items[0].observable.shape[0] != dim:
            raise ValueError(f"Observables are {items[0].observable.shape[0]}-dim, expected {dim}")
        object.__setattr__(self, "constraints", items)
        object.__setattr__(self, "dim", dim)

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __getitem__(self, key: int | str) -> Constraint:
        if isinstance(key, str):
            for c in self.constraints:
                if c.name == key:
                    return c
            raise KeyError(key)
        return self.constraints[key]

    @classmethod
    def from_state(cls, observables: Iterable[Observable], rho: object) -> ConstraintSet:
        """Constraints whose values and (tight) bounds are read off the state ``rho``."""
        items = []
        dim = as_matrix(rho).shape[0]
        for obs in observables:
            gamma = float(np.real(np.vdot(obs.operator, as_matrix(rho))))
            if obs.statistical:
                gamma = min(max(gamma, 0.0), 1.0)
            items.append(
                Constraint(
                    name=obs.name,
                    observable=obs.operator,
                    gamma=gamma,
                    lower=gamma,
                    upper=gamma,
                    statistical=obs.statistical,
                    outcomes=obs.outcomes,
                )
            )
        return cls(tuple(items), dim)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.constraints]

    @property
    def has_statistical(self) -> bool:
        return any(c.statistical for c in self.constraints)

    def extend(self, more: Iterable[Constraint]) -> ConstraintSet:
        return ConstraintSet(self.constraints + tuple(more), self.dim)

    def tight(self) -> ConstraintSet:
        """Every bound collapsed onto the simulated value (asymptotic regime)."""
        return ConstraintSet(
            tuple(replace(c, lower=c.gamma, upper=c.gamma) for c in self.constraints), self.dim
        )

    def with_bounds(self, m: int | float, eps: float) -> ConstraintSet:
        """Finite-statistics bounds from ``m`` samples per statistical constraint.

        ``m = inf`` gives :meth:`tight`. Source constraints always stay exact.
        """
        from qkdfk.finitekey import gamma_bounds

        if math.isinf(m):
            return self.tight()
        out = []
        for c in self.constraints:
            if not c.statistical:
                out.append(replace(c, lower=c.gamma, upper=c.gamma))
                continue
            lb, ub = gamma_bounds(c.gamma, int(m), c.outcomes, eps)
            out.append(replace(c, lower=lb, upper=ub))
        return ConstraintSet(tuple(out), self.dim)

    def max_violation(self, rho: object) -> float:
        """Largest amount by which ``rho`` leaves any interval (0 when feasible)."""
        worst = 0.0
        for c in self.constraints:
            v = c.value(rho)
            worst = max(worst, c.lower - v, v - c.upper)
        return worst

    def independent_tight(self, tol: float = 1e-9) -> list[Constraint]:
        """Tight constraints whose observables are independent of ``I`` and of each other.

        Dropping the others leaves the feasible set unchanged when the exact
        values are consistent, and keeps equality rows of an SDP linearly
        independent.
        """
        def vec(m: np.ndarray) -> np.ndarray:
            return np.concatenate([m.real.reshape(-1), m.imag.reshape(-1)])

        rows = [vec(np.eye(self.dim))]
        kept = []
        for c in self.constraints:
            if not c.is_tight:
                continue
            trial = np.array(rows + [vec(c.observable)])
            if np.linalg.matrix_rank(trial, tol=tol) == len(trial):
                rows.append(vec(c.observable))
                kept.append(c)
        return kept
