"""Two caches in series fed an IRM content stream.

The first cache sees every request; its misses form the only input of the
second cache. Content sizes are one packet and there is no timing: each
request is resolved through the chain before the next one is issued, so
the selection policy is driven by request count. A selection-policy first
cache is never unfrozen, so its miss stream reflects one selection cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from selcache.irm import zipf_popularity
from selcache.metrics import SDStats, sd_stats, stack_distance_array
from selcache.replacement import POLICIES, derive_seed, make_cache
from selcache.selection import SelectionCache, SelResult
from selcache.traffic import sample_contents

FIRST_POLICIES = POLICIES + ("SEL",)


@dataclass
class TandemResult:
    first: str
    second: str
    capacity: int
    seed: int
    requests: int
    first_hits: int
    second_requests: int
    second_hits: int
    miss_sd: SDStats | None = None

    @property
    def first_hit_ratio(self) -> float:
        return self.first_hits / self.requests if self.requests else 0.0

    @property
    def second_hit_ratio(self) -> float:
        return self.second_hits / self.second_requests if self.second_requests else 0.0


def irm_stream(n_contents: int, alpha: float, requests: int, seed: int) -> list[int]:
    rng = np.random.default_rng([seed, 3])
    return sample_contents(zipf_popularity(alpha, n_contents), requests, rng).tolist()


def first_cache_misses(policy: str, capacity: int, stream: list[int], seed: int = 0) -> tuple[int, list[int]]:
    """Hits of the first cache and the stream of requests it forwards."""
    policy = policy.upper()
    misses: list[int] = []
    keep = misses.append
    if policy == "SEL":
        sel = SelectionCache(capacity, frozen_period=math.inf)
        hits = 0
        for t, x in enumerate(stream):
            res = sel.on_request(x, t)
            if res is SelResult.HIT:
                hits += 1
                continue
            if res is SelResult.MISS_AND_FETCH:
                sel.on_data(x)
            keep(x)
        return hits, misses
    if policy not in POLICIES:
        raise ValueError(f"unknown first-cache policy {policy!r}")
    cache = make_cache(policy, capacity, derive_seed(seed, 1))
    lookup, insert = cache.lookup, cache.insert
    for x in stream:
        if not lookup(x):
            insert(x)
            keep(x)
    return len(stream) - len(misses), misses


def replay_hits(policy: str, capacity: int, stream: list[int], seed: int = 0) -> int:
    cache = make_cache(policy, capacity, derive_seed(seed, 2))
    lookup, insert = cache.lookup, cache.insert
    hits = 0
    for x in stream:
        if lookup(x):
            hits += 1
        else:
            insert(x)
    return hits


def run_tandem(first: str, seconds, capacity: int, *, n_contents: int = 1000, alpha: float = 1.0,
               requests: int = 1_000_000, seed: int = 1, with_sd: bool = True) -> list[TandemResult]:
    """One first-cache run shared by every second-cache policy in ``seconds``.

    Both caches hold ``capacity`` contents. The miss stream's stack
    distances are measured when ``with_sd`` is set.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if isinstance(seconds, str):
        seconds = [seconds]
    stream = irm_stream(n_contents, alpha, requests, seed)
    first_hits, misses = first_cache_misses(first, capacity, stream, seed)
    sd = sd_stats(stack_distance_array(misses)) if with_sd else None
    return [TandemResult(first.upper(), second.upper(), capacity, seed, requests, first_hits,
                         len(misses), replay_hits(second, capacity, misses, seed), sd)
            for second in seconds]
