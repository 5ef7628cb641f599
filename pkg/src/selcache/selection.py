"""Standalone selection-policy cache.

The cache fetches the first ``c`` distinct packets requested after it
enters the selecting phase, then freezes them for ``frozen_period``
seconds. When the timer fires the slots are cleared and a new selection
cycle starts.
"""

from __future__ import annotations

import enum
import math
from typing import Callable, Hashable

DEFAULT_FROZEN_PERIOD = 60.0


class Phase(enum.Enum):
    SELECTING = "selecting"
    FROZEN = "frozen"


class SelResult(enum.Enum):
    HIT = "hit"
    MISS_AND_FETCH = "miss_and_fetch"
    MISS_FORWARD = "miss_forward"


class SelectionCache:
    """Selection policy with slot reservation at request time.

    A slot is reserved when a request is selected; the packet becomes
    resident (and can hit) only once :meth:`on_data` delivers it.
    ``schedule`` is an optional ``(deadline, cache) -> None`` hook used by
    the engine to arm the frozen timer.
    """

    def __init__(self, capacity: int, frozen_period: float = DEFAULT_FROZEN_PERIOD,
                 schedule: Callable[[float, "SelectionCache"], None] | None = None):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        if frozen_period <= 0:
            raise ValueError("frozen period must be positive")
        self.capacity = int(capacity)
        self.frozen_period = float(frozen_period)
        self.schedule = schedule
        self.phase = Phase.SELECTING
        self.frozen_until = math.inf
        self.slots: list = []
        self._slot_of: dict = {}
        self.resident: set = set()
        # packets left over from the previous cycle, by slot index
        self._stale: list = []
        self.evictions = 0
        self.writes = 0
        self.cycles = 0

    def on_request(self, p: Hashable, now: float) -> SelResult:
        if p in self.resident:
            return SelResult.HIT
        if self.phase is Phase.SELECTING and p not in self._slot_of and len(self.slots) < self.capacity:
            self._slot_of[p] = len(self.slots)
            self.slots.append(p)
            if len(self.slots) == self.capacity:
                self._freeze(now)
            return SelResult.MISS_AND_FETCH
        # frozen, full, or reserved but not yet filled
        return SelResult.MISS_FORWARD

    def on_data(self, p: Hashable) -> bool:
        """Fill a reserved slot; True if the packet was stored."""
        j = self._slot_of.get(p)
        if j is None or p in self.resident:
            return False
        self.resident.add(p)
        self.writes += 1
        if j < len(self._stale) and self._stale[j] is not None and self._stale[j] != p:
            self.evictions += 1
        return True

    def on_timer(self, now: float) -> None:
        if self.phase is not Phase.FROZEN or now < self.frozen_until:
            return
        self.phase = Phase.SELECTING
        self.frozen_until = math.inf
        self._stale = [p if p in self.resident else None for p in self.slots]
        self.slots = []
        self._slot_of = {}
        self.resident = set()

    def _freeze(self, now: float) -> None:
        self.phase = Phase.FROZEN
        self.frozen_until = now + self.frozen_period
        self.cycles += 1
        if self.schedule is not None:
            self.schedule(self.frozen_until, self)

    def __contains__(self, p: Hashable) -> bool:
        return p in self.resident

    def __len__(self) -> int:
        return len(self.resident)

    def __repr__(self) -> str:
        return (f"SelectionCache(capacity={self.capacity}, phase={self.phase.value}, "
                f"reserved={len(self.slots)}, resident={len(self.resident)})")
