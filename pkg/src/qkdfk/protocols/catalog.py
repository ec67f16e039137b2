"""Protocol catalog: a registry of builders addressed by name."""

from __future__ import annotations

import logging
from collections.abc import Iterator
from typing import Any

from qkdfk.protocols.b92 import B92Protocol
from qkdfk.protocols.base import Protocol, ProtocolInstance
from qkdfk.protocols.bb84 import BB84Protocol
from qkdfk.protocols.mismatch import MismatchProtocol
from qkdfk.protocols.trojan import TrojanProtocol
from qkdfk.protocols.twin_field import TwinFieldProtocol

logger = logging.getLogger(__name__)


class ProtocolCatalog:
    """Maps protocol names to :class:`Protocol` builders."""

    def __init__(self, protocols: list[Protocol] | None = None) -> None:
        self._protocols: dict[str, Protocol] = {}
        for protocol in protocols or []:
            self.register(protocol)

    def register(self, protocol: Protocol) -> None:
        """Add a protocol, replacing any previous one with the same name."""
        self._protocols[protocol.name] = protocol
        logger.info("Registered protocol: %s", protocol.name)

    def get(self, name: str) -> Protocol:
        protocol = self._protocols.get(name)
        if protocol is None:
            available = ", ".join(sorted(self._protocols))
            raise ValueError(f"Unknown protocol '{name}'. Available: {available}")
        return protocol

    def build(self, name: str, **params: Any) -> ProtocolInstance:
        return self.get(name).build(**params)

    def list_protocols(self) -> list[dict[str, Any]]:
        return [self._protocols[n].metadata() for n in sorted(self._protocols)]

    def __contains__(self, name: object) -> bool:
        return name in self._protocols

    def __iter__(self) -> Iterator[Protocol]:
        return iter([self._protocols[n] for n in sorted(self._protocols)])

    def __len__(self) -> int:
        return len(self._protocols)


def default_catalog() -> ProtocolCatalog:
    """Catalog with every built-in protocol registered."""
    return ProtocolCatalog(
        [
            BB84Protocol(),
            B92Protocol(),
            TwinFieldProtocol(),
            MismatchProtocol(),
            TrojanProtocol(),
        ]
    )
