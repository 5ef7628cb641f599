"""Classical replacement-policy caches: LRU, FIFO and RND.

All three share ``lookup``/``insert``; callers insert only after a miss
(write-on-miss, i.e. universal caching).
"""

from __future__ import annotations

import random
from collections import OrderedDict
from typing import Hashable

import numpy as np

POLICIES = ("LRU", "FIFO", "RND")


class CacheContractError(RuntimeError):
    """Raised when a caller breaks the lookup/insert contract."""


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (e.g. global seed, router id)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint32).view(np.uint64)[0])


class ReplacementCache:
    policy = ""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = int(capacity)
        self.evictions = 0
        self.writes = 0

    def lookup(self, p: Hashable) -> bool:
        """Return True on a hit."""
        raise NotImplementedError

    def insert(self, p: Hashable):
        """Store ``p``; return the evicted packet or None."""
        raise NotImplementedError

    def __contains__(self, p: Hashable) -> bool:
        raise NotImplementedError

    def __len__(self) -> int:
        raise NotImplementedError

    def dump(self) -> list:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(capacity={self.capacity}, size={len(self)})"


class LRUCache(ReplacementCache):
    policy = "LRU"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        self._items: OrderedDict = OrderedDict()

    def lookup(self, p):
        items = self._items
        if p in items:
            items.move_to_end(p)
            return True
        return False

    def insert(self, p):
        items = self._items
        if p in items:
            raise CacheContractError(f"{p!r} already resident in {self!r}")
        if self.capacity == 0:
            return None
        evicted = None
        if len(items) >= self.capacity:
            evicted = items.popitem(last=False)[0]
            self.evictions += 1
        items[p] = None
        self.writes += 1
        return evicted

    def __contains__(self, p):
        return p in self._items

    def __len__(self):
        return len(self._items)

    def dump(self):
        """Resident packets, least recently used first."""
        return list(self._items)


class FIFOCache(ReplacementCache):
    policy = "FIFO"

    def __init__(self, capacity: int):
        super().__init__(capacity)
        # dicts keep insertion order; hits never reorder
        self._items: dict = {}

    def lookup(self, p):
        return p in self._items

    def insert(self, p):
        items = self._items
        if p in items:
            raise CacheContractError(f"{p!r} already resident in {self!r}")
        if self.capacity == 0:
            return None
        evicted = None
        if len(items) >= self.capacity:
            evicted = next(iter(items))
            del items[evicted]
            self.evictions += 1
        items[p] = None
        self.writes += 1
        return evicted

    def __contains__(self, p):
        return p in self._items

    def __len__(self):
        return len(self._items)

    def dump(self):
        """Resident packets, oldest insertion first."""
        return list(self._items)


class RandomCache(ReplacementCache):
    policy = "RND"

    def __init__(self, capacity: int, seed: int = 0):
        super().__init__(capacity)
        self.rng = random.Random(seed)
        self._keys: list = []
        self._pos: dict = {}

    def lookup(self, p):
        return p in self._pos

    def insert(self, p):
        pos = self._pos
        if p in pos:
            raise CacheContractError(f"{p!r} already resident in {self!r}")
        if self.capacity == 0:
            return None
        keys = self._keys
        self.writes += 1
        if len(keys) < self.capacity:
            pos[p] = len(keys)
            keys.append(p)
            return None
        i = self.rng.randrange(len(keys))
        evicted = keys[i]
        del pos[evicted]
        keys[i] = p
        pos[p] = i
        self.evictions += 1
        return evicted

    def __contains__(self, p):
        return p in self._pos

    def __len__(self):
        return len(self._keys)

    def dump(self):
        return list(self._keys)


def make_cache(policy: str, capacity: int, seed: int = 0) -> ReplacementCache:
    policy = policy.upper()
    if policy == "LRU":
        return LRUCache(capacity)
    if policy == "FIFO":
        return FIFOCache(capacity)
    if policy in ("RND", "RANDOM"):
        return RandomCache(capacity, seed)
    raise ValueError(f"unknown replacement policy {policy!r}")
