"""Selection-policy caching for networks of caches.

Packet-level discrete-event simulation of in-network caches running
classical replacement policies, the standalone selection policy and the
coordinated selection scheme, plus IRM analytics and stack-distance tools.
"""

from selcache.model import (
    CacheEvent,
    ContentId,
    DataPacket,
    EventKind,
    PacketId,
    RequestPacket,
    SimulationError,
    packet_order,
)

__version__ = "0.1.0"

__all__ = [
    "CacheEvent",
    "ContentId",
    "DataPacket",
    "EventKind",
    "PacketId",
    "RequestPacket",
    "SimulationError",
    "packet_order",
]
