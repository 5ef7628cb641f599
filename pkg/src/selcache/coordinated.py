"""Coordinated selection cache.

Caches on a route coordinate only through the Nomination Field (NF)
carried by request and data packets:

* a cache nominates a missed, un-nominated request by setting NF to 0;
  every later router on the way up adds one, every router on the way back
  subtracts one, and the router that sees NF == 0 on the data packet is
  the nominator and the only writer;
* a farther cache that hits on a nominated request has a duplicate of a
  packet the closer cache is about to store (a selection collision); it
  clears the slot's Protection Bit so the slot will be reused.

Counters follow the usual names: ``us`` unprotected slots, ``rs``
remaining selections, ``nw`` outstanding nominations, ``nw_threshold``
the nomination window cap. Slots are 0-based internally; ``pointer`` is
exposed 1-based (``capacity + 1`` when parked past the last slot).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable

from selcache.model import NOT_NOMINATED, DataPacket, RequestPacket, SimulationError
from selcache.selection import DEFAULT_FROZEN_PERIOD, Phase

FROZEN_TIMER = "frozen"
NW_TIMER = "nw"


@dataclass
class Serve:
    data: DataPacket


@dataclass
class Forward:
    request: RequestPacket


class ProtocolViolation(SimulationError):
    pass


class CoordCache:
    def __init__(self, capacity: int, *, nw_threshold: int = 1,
                 frozen_period: float = DEFAULT_FROZEN_PERIOD, nw_timeout: float = 0.1,
                 name: Hashable = None, max_nf: int | None = None, check: bool = True,
                 schedule: Callable[[float, "CoordCache", str], None] | None = None):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        if nw_threshold < 1:
            raise ValueError("nw_threshold must be >= 1")
        if frozen_period <= 0 or nw_timeout <= 0:
            raise ValueError("timer periods must be positive")
        c = int(capacity)
        self.capacity = c
        self.nw_threshold = int(nw_threshold)
        self.frozen_period = float(frozen_period)
        self.nw_timeout = float(nw_timeout)
        self.name = name
        self.max_nf = max_nf
        self.check = check
        self.schedule = schedule

        self.slots: list = [None] * c
        self.pb = bytearray(c)
        self.where: dict = {}
        self.phase = Phase.SELECTING
        self.us = c
        self.rs = c
        self.nw = 0
        self._ptr = 0
        self.frozen_until = math.inf
        self.nw_deadline = math.inf
        # maintained only by Protection Bit flips; checked against us
        self._unprotected = c

        self.requests = 0
        self.hits = 0
        self.nominations = 0
        self.writes = 0
        self.evictions = 0
        self.collisions = 0
        self.reselections = 0
        self.cycles = 0
        self.late_writes = 0

    # -- introspection -------------------------------------------------

    @property
    def pointer(self) -> int:
        return self._ptr + 1

    def protected(self, slot: int) -> bool:
        """Protection Bit of 1-based ``slot``."""
        return bool(self.pb[slot - 1])

    def packet_at(self, slot: int):
        return self.slots[slot - 1]

    def __contains__(self, p) -> bool:
        return p in self.where

    def __len__(self) -> int:
        return len(self.where)

    def state(self) -> dict:
        return {
            "cache": self.name,
            "capacity": self.capacity,
            "phase": self.phase.value,
            "US": self.us,
            "RS": self.rs,
            "NW": self.nw,
            "NW_th": self.nw_threshold,
            "pointer": self.pointer,
            "pb": "".join("1" if b else "0" for b in self.pb),
            "slots": [repr(s) for s in self.slots],
            "frozen_until": self.frozen_until,
            "nw_deadline": self.nw_deadline,
        }

    def __repr__(self) -> str:
        return (f"CoordCache({self.name!r}, c={self.capacity}, {self.phase.value}, "
                f"US={self.us}, RS={self.rs}, NW={self.nw}, pointer={self.pointer})")

    # -- packet handlers -----------------------------------------------

    def request(self, p, nf: int, now: float) -> tuple[bool, int]:
        """Handle a passing request.

        Returns ``(hit, nf_out)``: on a hit ``nf_out`` is the NF of the
        served data packet, otherwise the NF of the forwarded request.
        A miss turning NF from -1 into 0 is a nomination by this cache.
        """
        if nf < NOT_NOMINATED:
            self._violation(f"request NF {nf} below -1", packet=p)
        self.requests += 1
        i = self.where.get(p)
        if i is not None:
            self.hits += 1
            pb = self.pb
            if pb[i]:
                if nf >= 0:
                    self._collision(i)
            elif nf < 0:
                self._reselect(i, now)
            return True, nf

        if nf >= 0:
            nf += 1
            if self.max_nf is not None and nf > self.max_nf:
                self._violation(f"request NF {nf} exceeds route bound {self.max_nf}", packet=p)
            return False, nf
        # selecting: NW < min(RS, NW_th); frozen: keep selecting while some
        # unprotected slot has no outstanding nomination
        nw = self.nw
        if (self.capacity and nw < self.nw_threshold
                and (nw < self.rs if self.phase is Phase.SELECTING else self.us - nw > 0)):
            if nw == 0:
                self._restart_nw_timer(now)
            self.nw += 1
            self.nominations += 1
            if self.check and (self.nw > self.nw_threshold
                               or (self.phase is Phase.SELECTING and self.nw > self.rs)):
                self._violation("nomination window exceeded", packet=p)
            return False, 0
        return False, NOT_NOMINATED

    def data(self, p, nf: int, now: float) -> int:
        """Handle a data packet on the reverse path; returns the forwarded NF."""
        if nf > 0:
            return nf - 1
        if nf < 0:
            if nf < NOT_NOMINATED:
                self._violation(f"data NF {nf} below -1", packet=p)
            return NOT_NOMINATED
        self._write(p, now)
        return NOT_NOMINATED

    # -- timers --------------------------------------------------------

    def on_frozen_timer(self, now: float) -> None:
        if self.phase is not Phase.FROZEN or now < self.frozen_until:
            return
        self.phase = Phase.SELECTING
        self.frozen_until = math.inf
        c = self.capacity
        self.pb = bytearray(c)
        self._unprotected = c
        self.us = c
        self.rs = c
        self._ptr = 0
        if self.check:
            self._verify_full()

    def on_nw_timer(self, now: float) -> None:
        if now < self.nw_deadline:
            return
        self.nw //= 2
        if self.nw > 0:
            self._restart_nw_timer(now)
        else:
            self.nw_deadline = math.inf

    # -- message-level wrappers -------------------------------------------

    def on_request(self, req: RequestPacket, now: float = 0.0):
        hit, nf = self.request(req.packet, req.nf, now)
        if hit:
            return Serve(DataPacket(req.packet, nf))
        return Forward(RequestPacket(req.packet, nf, req.origin, req.issue_time))

    def on_data(self, data: DataPacket, now: float = 0.0) -> DataPacket:
        return DataPacket(data.packet, self.data(data.packet, data.nf, now), data.size_units)

    # -- internals -----------------------------------------------------

    def _collision(self, i: int) -> None:
        self.pb[i] = 0
        self._unprotected += 1
        self.us += 1
        self.collisions += 1
        # frozen caches park the pointer past the end, so only selecting
        # caches can see a collision after the pointer
        if i > self._ptr:
            self.rs += 1
        if self.check:
            self._verify()

    def _reselect(self, i: int, now: float) -> None:
        ptr = self._ptr
        selecting = self.phase is Phase.SELECTING
        counts = selecting and i >= ptr
        # never leave fewer write targets than outstanding nominations
        if counts:
            if self.rs - 1 < self.nw:
                return
        elif self.us - 1 < self.nw:
            return
        self.pb[i] = 1
        self._unprotected -= 1
        self.us -= 1
        self.reselections += 1
        if counts:
            self.rs -= 1
            if i == ptr:
                self._advance()
            if self.rs == 0:
                self._freeze(now)
        if self.check:
            self._verify()

    def _write(self, p, now: float) -> None:
        if self.nw > 0:
            self.nw -= 1
        else:
            # the nomination was written off by an NW timeout
            self.late_writes += 1
        if self.nw > 0:
            self._restart_nw_timer(now)
        else:
            self.nw_deadline = math.inf
        selecting = self.phase is Phase.SELECTING
        i = self.where.get(p)
        if i is not None:
            # a second nomination of an already stored packet
            if not self.pb[i]:
                if selecting and i >= self._ptr:
                    self.rs -= 1
                self.pb[i] = 1
                self._unprotected -= 1
                self.us -= 1
                if i == self._ptr:
                    self._advance()
            self.writes += 1
            if selecting and self.rs == 0:
                self._freeze(now)
            if self.check:
                self._verify()
            return

        target = self._ptr if self._ptr < self.capacity else self.pb.find(0)
        if target < 0:
            self._violation("nominated data arrived but every slot is protected", packet=p)
        old = self.slots[target]
        if old is not None:
            del self.where[old]
            self.evictions += 1
        self.slots[target] = p
        self.where[p] = target
        self.pb[target] = 1
        self._unprotected -= 1
        self.us -= 1
        self.writes += 1
        if selecting:
            self.rs -= 1
        if target == self._ptr:
            self._advance()
        if selecting and self.rs == 0:
            self._freeze(now)
        if self.check:
            self._verify()

    def _advance(self) -> None:
        nxt = self.pb.find(0, self._ptr + 1)
        self._ptr = self.capacity if nxt < 0 else nxt

    def _freeze(self, now: float) -> None:
        self.phase = Phase.FROZEN
        self.frozen_until = now + self.frozen_period
        self.cycles += 1
        if self.check:
            self._verify_full()
        if self.schedule is not None:
            self.schedule(self.frozen_until, self, FROZEN_TIMER)

    def _restart_nw_timer(self, now: float) -> None:
        self.nw_deadline = now + self.nw_timeout
        if self.schedule is not None:
            self.schedule(self.nw_deadline, self, NW_TIMER)

    def _verify(self) -> None:
        c = self.capacity
        if self.us != self._unprotected:
            self._violation(f"US={self.us} but {self._unprotected} slots have Pb=0")
        if not (0 <= self.us <= c and 0 <= self.rs <= c and self.nw >= 0):
            self._violation("counter out of range")
        if self.nw > self.nw_threshold:
            self._violation("NW above threshold")
        if self._ptr < c and self.pb[self._ptr]:
            self._violation("pointer on a protected slot")
        if self.phase is Phase.SELECTING:
            if self.nw > self.rs:
                self._violation("NW above RS while selecting")
        elif self.nw > self.us:
            self._violation("NW above US while frozen")

    def _verify_full(self) -> None:
        self._verify()
        if self.pb.count(0) != self.us:
            self._violation("US disagrees with a full Protection Bit recount")
        if self.phase is Phase.SELECTING:
            if self.pb.count(0, self._ptr) != self.rs:
                self._violation("RS disagrees with unprotected slots at or after the pointer")
        elif self._ptr != self.capacity:
            self._violation("frozen cache with pointer inside the slot array")

    def _violation(self, message: str, packet=None):
        diag = self.state()
        if packet is not None:
            diag["packet"] = repr(packet)
        raise ProtocolViolation(f"{self.name!r}: {message}", diag)
