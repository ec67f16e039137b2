"""Protocol catalog: simulated states, sift maps, constraints and reference formulas."""

from qkdfk.protocols.b92 import B92Protocol, b92
from qkdfk.protocols.base import (
    Granularity,
    ParameterSpec,
    Protocol,
    ProtocolInstance,
    ReferenceFormulas,
)
from qkdfk.protocols.bb84 import BB84Protocol, bb84
from qkdfk.protocols.catalog import ProtocolCatalog, default_catalog
from qkdfk.protocols.mismatch import MismatchProtocol, bb84_mismatch
from qkdfk.protocols.trojan import TrojanProtocol, trojan_bb84
from qkdfk.protocols.twin_field import (
    CharlieOutcome,
    KeyBasis,
    TwinFieldProtocol,
    loss_db_to_eta,
    plob,
    twin_field,
)

__all__ = [
    "B92Protocol",
    "BB84Protocol",
    "CharlieOutcome",
    "Granularity",
    "KeyBasis",
    "MismatchProtocol",
    "ParameterSpec",
    "Protocol",
    "ProtocolCatalog",
    "ProtocolInstance",
    "ReferenceFormulas",
    "TrojanProtocol",
    "TwinFieldProtocol",
    "b92",
    "bb84",
    "bb84_mismatch",
    "default_catalog",
    "loss_db_to_eta",
    "plob",
    "trojan_bb84",
    "twin_field",
]
