"""Quick self-test corpus behind ``qkdfk check``."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from qkdfk.finitekey import EntropyPath, KeyRateResult, coherent_correction, deviation
from qkdfk.matqi import fidelity_oracle
from qkdfk.minent import certified_minent, fidelity_sqrt_bound
from qkdfk.protocols.bb84 import bb84, hmin_formula, vn_keyterm_formula
from qkdfk.relent import certified_keyterm
from qkdfk.sdp.certify import certify_dual
from qkdfk.sdp.problem import Block, DualRepair, LinearConstraint, Relation, SdpProblem
from qkdfk.sdp.solver import solve

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    expected: float
    detail: str = ""
    elapsed_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "expected": self.expected,
            "detail": self.detail,
            "elapsed_s": self.elapsed_s,
        }


def _scalar_sdp() -> tuple[float, float, str]:
    problem = SdpProblem(
        blocks=[Block("x", 1)],
        objective={"x": np.array([[1.0]])},
        constraints=[LinearConstraint({"x": np.array([[1.0]])}, Relation.GE, 1.0, "x>=1")],
        repairs=(DualRepair(("x",), {0: -1.0}, "lower bound"),),
        name="scalar",
    )
    bound = certify_dual(problem, solve(problem))
    ok = abs(bound.value - 1.0) < 1e-6 and bound.value <= 1.0 + 1e-12
    return bound.value, 1.0, "certified" if ok else "bound above optimum or inaccurate"


def _fidelity() -> tuple[float, float, str]:
    rng = np.random.default_rng(7)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    p, q = a @ a.conj().T, b @ b.conj().T
    p, q = p / np.trace(p).real, q / np.trace(q).real
    expected = math.sqrt(fidelity_oracle(p, q))
    return fidelity_sqrt_bound(p, q).value, expected, "3x3 random states"


def _bb84_vn(q: float) -> Callable[[], tuple[float, float, str]]:
    def run() -> tuple[float, float, str]:
        inst = bb84(p_depol=q / 2.0)
        bound = certified_keyterm(inst.constraints.tight(), inst.sift, dims=inst.dims)
        return bound.value, vn_keyterm_formula(q, 0.5), f"Q={q}"

    return run


def _bb84_min(q: float) -> Callable[[], tuple[float, float, str]]:
    def run() -> tuple[float, float, str]:
        inst = bb84(p_depol=q / 2.0)
        bound = certified_minent(inst.constraints.tight(), inst.sift, p_pass=inst.sift_pass)
        return bound.hmin_value, hmin_formula(q), f"Q={q}"

    return run


def _deviation() -> tuple[float, float, str]:
    return deviation(1e6, 2, 1e-10), 0.004292, "m=1e6, d=2, eps=1e-10"


def _coherent() -> tuple[float, float, str]:
    base = KeyRateResult(ell=None, rate=0.5, path=EntropyPath.VON_NEUMANN)
    expected = 0.5 - 510.0 * math.log2(1e10 + 1.0) / 1e10
    return coherent_correction(base, 1e10, 4).rate, expected, "r=0.5, N=1e10, d=4"


CHECKS: list[tuple[str, Callable[[], tuple[float, float, str]], float]] = [
    ("sdp.scalar", _scalar_sdp, 1e-6),
    ("sdp.fidelity", _fidelity, 1e-6),
    ("bb84.vn.Q=0", _bb84_vn(0.0), ORACLE_TOL),
    ("bb84.vn.Q=0.05", _bb84_vn(0.05), ORACLE_TOL),
    ("bb84.min.Q=0", _bb84_min(0.0), ORACLE_TOL),
    ("bb84.min.Q=0.05", _bb84_min(0.05), ORACLE_TOL),
    ("finitekey.deviation", _deviation, 5e-7),
    ("finitekey.coherent", _coherent, 1e-9),
]


def run_checks(names: list[str] | None = None) -> list[CheckResult]:
    """Run the corpus (or the named subset); failures are reported, not raised."""
    results = []
    for name, fn, tol in CHECKS:
        if names and name not in names:
            continue
        start = time.perf_counter()
        try:
            value, expected, detail = fn()
            passed = abs(value - expected) <= tol
        except Exception as exc:
            logger.exception("check %s raised", name)
            value, expected, passed = math.nan, math.nan, False
            detail = f"{type(exc).__name__}: {exc}"
        results.append(
            CheckResult(name, passed, value, expected, detail, time.perf_counter() - start)
        )
    return results
