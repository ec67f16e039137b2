"""qkdfk - Certified finite-key rates for quantum key distribution."""

__version__ = "0.1.0"

from qkdfk.finitekey import (
    AttackModel,
    EntropyPath,
    KeyRateResult,
    SecurityProfile,
    TransmissionBudget,
)
from qkdfk.minent import MinEntropyBound, certified_minent
from qkdfk.pipeline import PathEvaluation, PipelineSettings, analytic_key_rate, evaluate
from qkdfk.protocols import ProtocolCatalog, ProtocolInstance, default_catalog
from qkdfk.relent import KeyTermBound, QreApproxConfig, certified_keyterm

__all__ = [
    "AttackModel",
    "EntropyPath",
    "KeyRateResult",
    "KeyTermBound",
    "MinEntropyBound",
    "PathEvaluation",
    "PipelineSettings",
    "ProtocolCatalog",
    "ProtocolInstance",
    "QreApproxConfig",
    "SecurityProfile",
    "TransmissionBudget",
    "analytic_key_rate",
    "certified_keyterm",
    "certified_minent",
    "default_catalog",
    "evaluate",
]
