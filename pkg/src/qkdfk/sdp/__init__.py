"""Semidefinite programming: problem model, interior-point solver, certificates."""

from qkdfk.sdp.certify import certify_dual, check_slater, interior_point
from qkdfk.sdp.lmi import AffineColumn, AffineMatrix, AffineScalar, DualProgram, bmat
from qkdfk.sdp.problem import (
    Block,
    BoundDirection,
    CertifiedBound,
    DualRepair,
    LinearConstraint,
    Relation,
    SdpProblem,
    SdpSolution,
    Sense,
    SlaterReport,
    SolverError,
    SolveStatus,
    dump_sdpa,
)
from qkdfk.sdp.solver import InteriorPointSolver, solve

__all__ = [
    "AffineColumn",
    "AffineMatrix",
    "AffineScalar",
    "Block",
    "BoundDirection",
    "CertifiedBound",
    "DualProgram",
    "DualRepair",
    "InteriorPointSolver",
    "LinearConstraint",
    "Relation",
    "SdpProblem",
    "SdpSolution",
    "Sense",
    "SlaterReport",
    "SolveStatus",
    "SolverError",
    "bmat",
    "certify_dual",
    "check_slater",
    "dump_sdpa",
    "interior_point",
    "solve",
]
