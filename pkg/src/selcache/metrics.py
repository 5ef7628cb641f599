"""Stack-distance analysis and network-level metrics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from selcache.engine import RunCounters


@dataclass
class SDStats:
    min_sd: int | None
    max_sd: int | None
    avg_sd: float | None
    histogram: dict[int, int] = field(default_factory=dict)
    undefined_count: int = 0

    @property
    def absent(self) -> bool:
        return not self.histogram

    @property
    def defined_count(self) -> int:
        return sum(self.histogram.values())


@dataclass
class MetricsReport:
    hit_net: float | None
    h_red: float | None
    t_red: float | None
    e_avg: float | None
    per_cache_hits: dict[str, float | None] = field(default_factory=dict)
    sd: dict[str, SDStats] | None = None


def _previous_occurrence(codes: np.ndarray) -> np.ndarray:
    """Index of the previous request for the same id, -1 for first ones."""
    n = len(codes)
    order = np.argsort(codes, kind="stable")
    prev = np.full(n, -1, dtype=np.int64)
    same = codes[order[1:]] == codes[order[:-1]]
    prev[order[1:][same]] = order[:-1][same]
    return prev


def _greater_before(a: np.ndarray) -> np.ndarray:
    """``out[j] = #{m < j : a[m] > a[j]}`` for non-negative ``a``.

    Bottom-up merge counting: at block size ``b`` every element of a right
    block is compared with the sorted left block of its pair.
    """
    n = len(a)
    out = np.zeros(n, dtype=np.int64)
    shift = int(a.max(initial=0)) + 2
    pos = np.arange(n, dtype=np.int64)
    runs = a.astype(np.int64)  # position i holds a value of block i // b, blocks sorted
    b = 1
    while b < n:
        pair = pos // (2 * b)
        left = (pos // b) % 2 == 0
        left_keys = pair[left] * shift + runs[left]
        j = pos[~left]
        pj = pair[~left]
        out[j] += (np.searchsorted(left_keys, (pj + 1) * shift, side="left")
                   - np.searchsorted(left_keys, pj * shift + a[j], side="right"))
        runs = np.sort(pair * shift + runs, kind="stable") - pair * shift
        b *= 2
    return out


def stack_distance_array(stream: Sequence[Hashable]) -> np.ndarray:
    """Stack distances as an int array, -1 marking first occurrences.

    The distinct ids strictly between positions ``p`` and ``j`` number the
    window length minus the requests inside the window whose previous
    occurrence is also inside it, i.e. minus the ``m < j`` with
    ``prev[m] > p``.
    """
    n = len(stream)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    codes: dict = {}
    ids = np.fromiter((codes.setdefault(x, len(codes)) for x in stream), dtype=np.int64, count=n)
    prev = _previous_occurrence(ids)
    nested = _greater_before(prev + 1)
    sd = np.arange(n, dtype=np.int64) - prev - 1 - nested
    sd[prev < 0] = -1
    return sd


def stack_distances(stream: Sequence[Hashable]) -> list[int | None]:
    """Distinct ids strictly between each request and the previous request
    for the same id; ``None`` for first occurrences."""
    return [None if d < 0 else d for d in stack_distance_array(stream).tolist()]


def sd_stats(sds: Iterable[int | None]) -> SDStats:
    """Min, max and histogram-weighted mean over the defined distances.

    Accepts the list form or the array form (-1 for undefined)."""
    if isinstance(sds, np.ndarray):
        defined = sds[sds >= 0]
        undefined = len(sds) - len(defined)
        if not len(defined):
            return SDStats(None, None, None, {}, undefined)
        values, counts = np.unique(defined, return_counts=True)
        hist = dict(zip(values.tolist(), counts.tolist()))
        return SDStats(int(values[0]), int(values[-1]), float(defined.mean()), hist, undefined)
    hist: Counter = Counter()
    undefined = 0
    for d in sds:
        if d is None:
            undefined += 1
        else:
            hist[d] += 1
    if not hist:
        return SDStats(None, None, None, {}, undefined)
    total = sum(hist.values())
    avg = sum(d * c for d, c in hist.items()) / total
    return SDStats(min(hist), max(hist), avg, dict(sorted(hist.items())), undefined)


def compute_report(counters: RunCounters) -> MetricsReport:
    """Network metrics of one run.

    The no-cache reference is analytic: without caches every request
    travels its whole route, so its hop distance is the route length plus
    the consumer-to-edge hop and its data crosses every link from the
    producer to the edge router.
    """
    entered = counters.r_entered
    nocache_hops = sum(n * (L + 1) for n, L in zip(counters.route_requests, counters.route_lengths))
    nocache_traffic = sum(n * L for n, L in zip(counters.route_requests, counters.route_lengths))
    hit_net = (entered - counters.r_producer) / entered if entered else None
    h_red = counters.hop_sum / nocache_hops if nocache_hops else None
    t_red = counters.traffic_sum / nocache_traffic if nocache_traffic else None
    slots = counters.slots_total
    e_avg = counters.evictions_total / slots if slots else None
    per_cache = {r.name: r.hit_ratio for r in counters.routers}
    return MetricsReport(hit_net, h_red, t_red, e_avg, per_cache)
