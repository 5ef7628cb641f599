"""Shared identity, packet and event vocabulary."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from typing import Any

ContentId = int

NOT_NOMINATED = -1


class SimulationError(RuntimeError):
    """A simulator or protocol invariant was violated.

    ``diagnostics`` carries the offending cache state and, when available,
    the tail of the event trace.
    """

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True, order=True)
class PacketId:
    """A data packet: ``index`` is the 1-based position inside ``content``."""

    content: ContentId
    index: int = 1

    def __post_init__(self) -> None:
        if self.content < 1:
            raise ValueError(f"content id must be >= 1, got {self.content}")
        if self.index < 1:
            raise ValueError(f"packet index must be >= 1, got {self.index}")


def packet_order(a: PacketId, b: PacketId) -> int:
    """Three-way compare, content-major then index: -1, 0 or 1."""
    ka = (a.content, a.index)
    kb = (b.content, b.index)
    return (ka > kb) - (ka < kb)


@dataclass
class RequestPacket:
    packet: PacketId
    nf: int = NOT_NOMINATED
    origin: Any = None
    issue_time: float = 0.0

    def __post_init__(self) -> None:
        if self.nf < NOT_NOMINATED:
            raise ValueError(f"NF must be >= -1, got {self.nf}")


@dataclass
class DataPacket:
    packet: PacketId
    nf: int = NOT_NOMINATED
    size_units: int = 1

    def __post_init__(self) -> None:
        if self.nf < NOT_NOMINATED:
            raise ValueError(f"NF must be >= -1, got {self.nf}")


class EventKind(enum.Enum):
    HIT = "hit"
    MISS = "miss"
    WRITE = "write"
    EVICTION = "eviction"


@dataclass(frozen=True)
class CacheEvent:
    kind: EventKind
    packet: Any
    cache: Any
    time: float


class PacketIndex:
    """Dense integer keys for packets, content-major.

    ``key(c, i) = offset[c] + i - 1`` so integer order equals
    :class:`PacketId` order; the engine works on these keys.
    """

    def __init__(self, sizes):
        # sizes[k] is the packet count of content k + 1
        self.sizes = [int(s) for s in sizes]
        if any(s < 1 for s in self.sizes):
            raise ValueError("every content needs at least one packet")
        self.offsets = [0] * (len(self.sizes) + 2)
        total = 0
        for k, s in enumerate(self.sizes):
            self.offsets[k + 1] = total
            total += s
        self.offsets[len(self.sizes) + 1] = total
        self.total = total

    @property
    def n_contents(self) -> int:
        return len(self.sizes)

    def key(self, p: PacketId) -> int:
        if p.content > len(self.sizes) or p.index > self.sizes[p.content - 1]:
            raise ValueError(f"{p} outside the catalog")
        return self.offsets[p.content] + p.index - 1

    def packet(self, key: int) -> PacketId:
        c = bisect.bisect_right(self.offsets, key, 1, len(self.sizes) + 1) - 1
        return PacketId(c, key - self.offsets[c] + 1)
