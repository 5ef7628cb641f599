"""Discrete-event engine moving requests up routes and data back down.

A run is single threaded over one event queue ordered by
``(time, sequence)``. Packet requests enter at edge routers straight from
the pre-generated workload; every forwarding step between routers costs
the link delay and is a queued event, except that routers without a
cache are crossed inline (they hold no state, so timing cannot matter).
Producers serve every request that reaches them.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from selcache.coordinated import FROZEN_TIMER, CoordCache
from selcache.model import NOT_NOMINATED, CacheEvent, EventKind, PacketIndex, SimulationError
from selcache.replacement import POLICIES, derive_seed, make_cache
from selcache.selection import DEFAULT_FROZEN_PERIOD, SelectionCache, SelResult
from selcache.topology import Topology, shortest_path_routes
from selcache.traffic import TrafficProfile, Workload, generate_workload, sample_catalog_sizes

CACHE_POLICIES = POLICIES + ("SEL", "COORD", "NONE")

_NONE, _REPL, _SEL, _COORD = 0, 1, 2, 3
_REQ, _DATA, _TIMER = 0, 1, 2


@dataclass(frozen=True)
class CacheSpec:
    policy: str
    capacity: int

    def __post_init__(self):
        if self.policy not in CACHE_POLICIES:
            raise ValueError(f"unknown cache policy {self.policy!r}")
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")


@dataclass
class Scenario:
    name: str
    topology: Topology
    caches: dict[int, CacheSpec]
    profiles: list[TrafficProfile]
    duration: float
    seeds: list[int] = field(default_factory=lambda: [1])
    content_sizes: Sequence[int] | None = None
    nw_threshold: int = 1
    frozen_period: float = DEFAULT_FROZEN_PERIOD
    nw_timeout: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for r in self.caches:
            if not 0 <= r < self.topology.n_routers:
                raise ValueError(f"cache spec for unknown router {r}")

    def sizes_for(self, seed: int) -> np.ndarray:
        if self.content_sizes is not None:
            return np.asarray(self.content_sizes, dtype=np.int64)
        return sample_catalog_sizes(self.profiles, seed)

    def slots_total(self) -> int:
        return sum(s.capacity for s in self.caches.values() if s.policy != "NONE")

    def default_nw_timeout(self) -> float:
        """Twice the network diameter (hops, producers included) times the
        largest link delay: an upper bound on any round trip."""
        topo = self.topology
        delays = list(topo.links.values()) + [p.delay for p in topo.producers]
        return 2 * topo.diameter() * max(delays)


@dataclass
class RouterCounters:
    name: str
    role: str
    policy: str
    capacity: int
    requests: int = 0
    hits: int = 0
    forwarded: int = 0
    writes: int = 0
    evictions: int = 0
    nominations: int = 0
    collisions: int = 0
    reselections: int = 0
    cycles: int = 0

    @property
    def hit_ratio(self) -> float | None:
        return self.hits / self.requests if self.requests else None


@dataclass
class RunCounters:
    scenario: str
    seed: int
    duration: float
    r_entered: int = 0
    r_producer: int = 0
    hop_sum: int = 0
    traffic_sum: int = 0
    route_lengths: list[int] = field(default_factory=list)
    route_requests: list[int] = field(default_factory=list)
    routers: list[RouterCounters] = field(default_factory=list)
    nominations: int = 0
    tokens_written: int = 0
    content_requests: int = 0
    events: int = 0
    # (window start, requests entered, requests reaching a producer)
    timeline: list[tuple[float, int, int]] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def evictions_total(self) -> int:
        return sum(r.evictions for r in self.routers)

    @property
    def slots_total(self) -> int:
        return sum(r.capacity for r in self.routers if r.policy != "NONE")


class Simulator:
    """One (scenario, seed) run. ``check_invariants`` turns on the
    coordination-protocol assertions; ``trace_size`` bounds the ring
    buffer of recent cache events attached to failures."""

    def __init__(self, scenario: Scenario, seed: int, *, check_invariants: bool = True,
                 trace_size: int = 64, workload: Workload | None = None,
                 timeline_window: float | None = None):
        self.scenario = scenario
        self.timeline_window = timeline_window
        self.seed = seed
        self.check = check_invariants
        topo = scenario.topology
        self.routes_by_pair = shortest_path_routes(topo)
        self.routes = [self.routes_by_pair[k] for k in sorted(self.routes_by_pair)]
        self.route_index = {k: i for i, k in enumerate(sorted(self.routes_by_pair))}
        self.max_nf = max(len(r) for r in self.routes)
        self.sizes = scenario.sizes_for(seed)
        self.packets = PacketIndex(self.sizes)
        if workload is None:
            groups = list(range(len(topo.groups)))
            parts = [generate_workload(_with_seed(p, seed), groups, scenario.duration, self.sizes, stream=k)
                     for k, p in enumerate(scenario.profiles)]
            workload = Workload.merge(parts)
        self.workload = workload
        self.trace: deque = deque(maxlen=trace_size) if trace_size else None
        self.heap: list = []
        self._seq = itertools.count()
        nw_timeout = scenario.nw_timeout or scenario.default_nw_timeout()
        self.caches: list = [None] * topo.n_routers
        self.kinds = [_NONE] * topo.n_routers
        self.counters = [RouterCounters(topo.router_names[r], topo.roles[r], "NONE", 0)
                         for r in range(topo.n_routers)]
        for r, spec in sorted(scenario.caches.items()):
            rc = self.counters[r]
            rc.policy, rc.capacity = spec.policy, spec.capacity
            if spec.policy == "NONE" or spec.capacity == 0:
                continue
            if spec.policy in POLICIES:
                self.caches[r] = make_cache(spec.policy, spec.capacity, derive_seed(seed, r))
                self.kinds[r] = _REPL
            elif spec.policy == "SEL":
                self.caches[r] = SelectionCache(spec.capacity, scenario.frozen_period,
                                                schedule=self._timer_hook(r))
                self.kinds[r] = _SEL
            else:
                self.caches[r] = CoordCache(spec.capacity, nw_threshold=scenario.nw_threshold,
                                            frozen_period=scenario.frozen_period, nw_timeout=nw_timeout,
                                            name=topo.router_names[r], max_nf=self.max_nf,
                                            check=check_invariants, schedule=self._timer_hook(r))
                self.kinds[r] = _COORD

    def _timer_hook(self, r: int):
        heap, seq = self.heap, self._seq

        def schedule(deadline, cache, kind=FROZEN_TIMER):
            heapq.heappush(heap, (deadline, next(seq), _TIMER, r, kind, 0, 0, 0))

        return schedule

    def run(self) -> RunCounters:
        try:
            return self._run()
        except SimulationError as err:
            err.diagnostics.setdefault("scenario", self.scenario.name)
            err.diagnostics.setdefault("seed", self.seed)
            if self.trace is not None:
                err.diagnostics["trace"] = [
                    {"time": e.time, "kind": e.kind.value, "cache": e.cache, "packet": e.packet}
                    for e in self.cache_events()]
            raise

    def cache_events(self) -> list[CacheEvent]:
        names = self.scenario.topology.router_names
        return [CacheEvent(EventKind(k), self.packets.packet(key), names[r], t)
                for t, k, r, key in (self.trace or ())]

    def _run(self) -> RunCounters:
        sc = self.scenario
        check = self.check
        heap = self.heap
        seq = self._seq
        push = heapq.heappush
        pop = heapq.heappop
        trace = self.trace
        log = trace.append if trace is not None else None

        routes_r = [r.routers for r in self.routes]
        routes_d = [r.delays for r in self.routes]
        kinds = self.kinds
        caches = self.caches
        ctr = self.counters
        req_in = [0] * len(kinds)
        hits = [0] * len(kinds)
        fwd = [0] * len(kinds)
        route_requests = [0] * len(self.routes)
        owner: dict[int, int] = {}
        tokens = itertools.count(1)
        window = self.timeline_window
        # producer arrivals past the end fold into the last window
        n_bins = max(1, math.ceil(sc.duration / window)) if window else 0
        prod_bins = [0] * n_bins
        stats = {"producer": 0, "hop": 0, "traffic": 0, "nominations": 0, "written": 0, "events": 0}

        def violation(msg, **diag):
            raise SimulationError(msg, diag)

        def served(ri, pos, t, key, nf, tok):
            # data leaves router ``pos`` (or the producer when pos == len)
            stats["hop"] += pos + 1
            stats["traffic"] += pos
            if pos:
                down(t + routes_d[ri][pos - 1], ri, pos - 1, key, nf, tok, t)

        def down(t, ri, pos, key, nf, tok, now):
            route = routes_r[ri]
            delays = routes_d[ri]
            while True:
                r = route[pos]
                kind = kinds[r]
                if kind != _NONE and t > now:
                    push(heap, (t, next(seq), _DATA, ri, pos, key, nf, tok))
                    return
                if kind == _REPL:
                    cache = caches[r]
                    if key not in cache:
                        victim = cache.insert(key)
                        if log:
                            log((t, "write", r, key))
                            if victim is not None:
                                log((t, "eviction", r, victim))
                    if nf > 0:
                        nf -= 1
                elif kind == _COORD:
                    if nf == 0:
                        if check:
                            who = owner.pop(tok, None)
                            if who != r:
                                violation("nominated data written at a cache that did not nominate it",
                                          router=r, token=tok, nominator=who)
                        stats["written"] += 1
                        if log:
                            log((t, "write", r, key))
                    nf = caches[r].data(key, nf, t)
                else:
                    if kind == _SEL and caches[r].on_data(key) and log:
                        log((t, "write", r, key))
                    if nf > 0:
                        nf -= 1
                if pos == 0:
                    return
                t += delays[pos - 1]
                pos -= 1

        def up(t, ri, pos, key, nf, tok, now):
            route = routes_r[ri]
            delays = routes_d[ri]
            last = len(route) - 1
            while True:
                r = route[pos]
                kind = kinds[r]
                if kind != _NONE and t > now:
                    push(heap, (t, next(seq), _REQ, ri, pos, key, nf, tok))
                    return
                req_in[r] += 1
                if kind == _REPL:
                    if caches[r].lookup(key):
                        hits[r] += 1
                        if log:
                            log((t, "hit", r, key))
                        served(ri, pos, t, key, nf, tok)
                        return
                    if nf >= 0:
                        nf += 1
                elif kind == _COORD:
                    hit, nf2 = caches[r].request(key, nf, t)
                    if hit:
                        hits[r] += 1
                        if log:
                            log((t, "hit", r, key))
                        served(ri, pos, t, key, nf2, tok)
                        return
                    if nf2 == 0:
                        if nf != NOT_NOMINATED:
                            violation("nomination of an already nominated request", router=r, nf=nf)
                        tok = next(tokens)
                        stats["nominations"] += 1
                        if check:
                            owner[tok] = r
                    nf = nf2
                else:
                    if kind == _SEL and caches[r].on_request(key, t) is SelResult.HIT:
                        hits[r] += 1
                        if log:
                            log((t, "hit", r, key))
                        served(ri, pos, t, key, nf, tok)
                        return
                    if nf >= 0:
                        nf += 1
                if log:
                    log((t, "miss", r, key))
                fwd[r] += 1
                t += delays[pos]
                if pos == last:
                    # producer answers and the data starts back down
                    stats["producer"] += 1
                    if window:
                        prod_bins[min(int(t / window), n_bins - 1)] += 1
                    stats["hop"] += pos + 2
                    stats["traffic"] += pos + 1
                    down(t + delays[pos], ri, pos, key, nf, tok, now)
                    return
                pos += 1

        wl = self.workload
        topo = sc.topology
        route_of = np.full((max(len(topo.groups), 1), max(len(topo.producers), 1)), -1, dtype=np.int64)
        for (g, p), i in self.route_index.items():
            route_of[g, p] = i
        prod_of = np.asarray(topo.producer_of_content(), dtype=np.int64)
        offsets = np.asarray(self.packets.offsets, dtype=np.int64)
        w_time = wl.time.tolist()
        w_route = route_of[wl.group, prod_of[wl.content - 1]].tolist()
        w_key = (offsets[wl.content] + wl.index - 1).tolist()
        n_w = len(w_time)
        for ri in w_route:
            route_requests[ri] += 1

        # sentinels: the workload and the queue both end in +inf
        inf = float("inf")
        w_time.append(inf)
        push(heap, (inf, -1, _TIMER, 0, 0, 0, 0, 0))
        wi = 0
        n_events = 0
        while True:
            t = w_time[wi]
            if t <= heap[0][0]:
                if t == inf:
                    break
                up(t, w_route[wi], 0, w_key[wi], NOT_NOMINATED, 0, t)
                wi += 1
            else:
                t, _, kind, a, b, key, nf, tok = pop(heap)
                if kind == _REQ:
                    up(t, a, b, key, nf, tok, t)
                elif kind == _DATA:
                    down(t, a, b, key, nf, tok, t)
                else:
                    cache = caches[a]
                    if b == FROZEN_TIMER:
                        if isinstance(cache, SelectionCache):
                            cache.on_timer(t)
                        else:
                            cache.on_frozen_timer(t)
                    else:
                        cache.on_nw_timer(t)
            n_events += 1

        if check and owner:
            tok, r = next(iter(owner.items()))
            violation(f"{len(owner)} nominations never written", token=tok, router=r)

        out = RunCounters(sc.name, self.seed, sc.duration, meta=dict(sc.meta))
        out.r_entered = n_w
        out.r_producer = stats["producer"]
        out.hop_sum = stats["hop"]
        out.traffic_sum = stats["traffic"]
        out.route_lengths = [len(r) for r in self.routes]
        out.route_requests = route_requests
        out.nominations = stats["nominations"]
        out.tokens_written = stats["written"]
        out.content_requests = wl.n_content_requests
        out.events = n_events
        if window:
            entered = np.bincount(np.minimum((wl.time / window).astype(np.int64), n_bins - 1),
                                  minlength=n_bins)
            out.timeline = [(k * window, int(e), int(p)) for k, (e, p) in enumerate(zip(entered, prod_bins))]
        for r, rc in enumerate(ctr):
            rc.requests, rc.hits, rc.forwarded = req_in[r], hits[r], fwd[r]
            cache = caches[r]
            if cache is not None:
                rc.writes = cache.writes
                rc.evictions = cache.evictions
                rc.cycles = getattr(cache, "cycles", 0)
                rc.nominations = getattr(cache, "nominations", 0)
                rc.collisions = getattr(cache, "collisions", 0)
                rc.reselections = getattr(cache, "reselections", 0)
            if check and rc.requests != rc.hits + rc.forwarded:
                violation("flow conservation broken", router=rc.name)
        out.routers = ctr
        return out


def _with_seed(profile: TrafficProfile, seed: int) -> TrafficProfile:
    from dataclasses import replace

    return replace(profile, seed=seed)


def run_simulation(scenario: Scenario, seed: int, *, check_invariants: bool = True,
                   trace_size: int = 64) -> RunCounters:
    return Simulator(scenario, seed, check_invariants=check_invariants, trace_size=trace_size).run()


def uniform_caches(topo: Topology, policy: str, capacity: int) -> dict[int, CacheSpec]:
    return {r: CacheSpec(policy, capacity) for r in range(topo.n_routers)}


def big_caches(topo: Topology, policy: str, edge_capacity: int) -> dict[int, CacheSpec]:
    return {r: CacheSpec(policy, edge_capacity if topo.roles[r] == "edge" else 0)
            for r in range(topo.n_routers)}

