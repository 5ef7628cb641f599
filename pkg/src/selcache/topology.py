"""Network topologies and deterministic shortest-path routing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import networkx as nx

DEFAULT_DELAY = 0.010
ABILENE_SHA256 = "6b05ea644f3c53a987559077cce0b0d91256f31ecc386f5bf02c721fc51fc136"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Producer:
    name: str
    router: int
    catalog: range
    delay: float = DEFAULT_DELAY


@dataclass(frozen=True)
class ConsumerGroup:
    name: str
    router: int
    consumers: int = 1


@dataclass
class Topology:
    """Routers are dense ids ``0..n-1``; lower ids win routing ties."""

    router_names: list[str] = field(default_factory=list)
    roles: list[str] = field(default_factory=list)
    links: dict[tuple[int, int], float] = field(default_factory=dict)
    producers: list[Producer] = field(default_factory=list)
    groups: list[ConsumerGroup] = field(default_factory=list)

    def add_router(self, name: str, role: str = "core") -> int:
        if name in self.router_names:
            raise TopologyError(f"duplicate router {name!r}")
        self.router_names.append(name)
        self.roles.append(role)
        return len(self.router_names) - 1

    def router_id(self, name: str) -> int:
        try:
            return self.router_names.index(name)
        except ValueError:
            raise TopologyError(f"unknown router {name!r}") from None

    def add_link(self, u: int, v: int, delay: float = DEFAULT_DELAY) -> None:
        if u == v:
            raise TopologyError("self loops are not allowed")
        if delay < 0:
            raise TopologyError("link delay must be >= 0")
        self.links[(min(u, v), max(u, v))] = float(delay)

    def delay(self, u: int, v: int) -> float:
        return self.links[(min(u, v), max(u, v))]

    def add_group(self, name: str, router: int, consumers: int = 1) -> int:
        self.roles[router] = "edge"
        self.groups.append(ConsumerGroup(name, router, consumers))
        return len(self.groups) - 1

    def add_producer(self, name: str, router: int, catalog: range, delay: float = DEFAULT_DELAY) -> int:
        self.producers.append(Producer(name, router, catalog, delay))
        return len(self.producers) - 1

    @property
    def n_routers(self) -> int:
        return len(self.router_names)

    @property
    def n_contents(self) -> int:
        return max((p.catalog.stop - 1 for p in self.producers), default=0)

    def edge_routers(self) -> list[int]:
        return [r for r, role in enumerate(self.roles) if role == "edge"]

    def core_routers(self) -> list[int]:
        return [r for r, role in enumerate(self.roles) if role != "edge"]

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_routers))
        for (u, v), d in self.links.items():
            g.add_edge(u, v, delay=d)
        return g

    def full_graph(self) -> nx.Graph:
        """Routers plus producer nodes (``("producer", k)``)."""
        g = self.graph()
        for k, p in enumerate(self.producers):
            g.add_edge(("producer", k), p.router, delay=p.delay)
        return g

    def diameter(self) -> int:
        return nx.diameter(self.full_graph())

    def producer_of_content(self) -> list[int]:
        """Entry ``k`` is the producer index serving content ``k + 1``."""
        owner = [-1] * self.n_contents
        for k, p in enumerate(self.producers):
            for c in p.catalog:
                if owner[c - 1] != -1:
                    raise TopologyError(f"content {c} has two producers")
                owner[c - 1] = k
        if -1 in owner:
            raise TopologyError("content ids are not covered by producers")
        return owner

    def validate(self) -> None:
        if not self.groups or not self.producers:
            raise TopologyError("need at least one consumer group and one producer")
        g = self.graph()
        if self.n_routers and not nx.is_connected(g):
            raise TopologyError("router graph is not connected")
        for grp in self.groups:
            if not 0 <= grp.router < self.n_routers:
                raise TopologyError(f"group {grp.name} attached to unknown router")
        for p in self.producers:
            if not 0 <= p.router < self.n_routers:
                raise TopologyError(f"producer {p.name} attached to unknown router")
        self.producer_of_content()


@dataclass(frozen=True)
class Route:
    """Group-to-producer path. ``delays[k]`` is the link after ``routers[k]``;
    the last entry is the link to the producer."""

    group: int
    producer: int
    routers: tuple[int, ...]
    delays: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.routers)


def build_binary_tree(levels: int, consumers_per_group: int = 125, contents: int = 1000,
                      delay: float = DEFAULT_DELAY) -> Topology:
    """Full binary tree of routers; every leaf hosts a consumer group and a
    single producer hangs off the root. Routers are heap-numbered r1..r(2^L-1)."""
    if levels < 2:
        raise TopologyError("a tree needs at least 2 levels")
    topo = Topology()
    n = 2 ** levels - 1
    for k in range(1, n + 1):
        topo.add_router(f"r{k}", "core")
    for k in range(2, n + 1):
        topo.add_link(k // 2 - 1, k - 1, delay)
    for k in range(2 ** (levels - 1), n + 1):
        topo.add_group(f"g{k}", k - 1, consumers_per_group)
    topo.add_producer("p0", 0, range(1, contents + 1), delay)
    topo.validate()
    return topo


def load_adjacency(path) -> list[tuple[str, str, float]]:
    links = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise TopologyError(f"{path}:{lineno}: expected '<u> <v> [delay]'")
        try:
            d = float(parts[2]) if len(parts) == 3 else DEFAULT_DELAY
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: bad delay {parts[2]!r}") from None
        links.append((parts[0], parts[1], d))
    if not links:
        raise TopologyError(f"{path}: no links")
    return links


def abilene_path() -> Path:
    return Path(str(resources.files("selcache") / "data" / "abilene.txt"))


def build_abilene(consumers_per_group: int = 100, contents_per_producer: int = 100,
                  delay: float | None = None, path=None, verify_checksum: bool = True) -> Topology:
    """Abilene core; each core router gets one edge router (with a consumer
    group) and one producer with its own catalog."""
    path = Path(path) if path is not None else abilene_path()
    if verify_checksum and path == abilene_path():
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != ABILENE_SHA256:
            raise TopologyError("bundled Abilene adjacency does not match its pinned checksum")
    links = load_adjacency(path)
    topo = Topology()
    cores: list[str] = []
    for u, v, _ in links:
        for name in (u, v):
            if name not in cores:
                cores.append(name)
    for name in cores:
        topo.add_router(name, "core")
    for u, v, d in links:
        topo.add_link(topo.router_id(u), topo.router_id(v), d if delay is None else delay)
    hop = DEFAULT_DELAY if delay is None else delay
    for k, name in enumerate(cores):
        e = topo.add_router(f"edge-{name}", "edge")
        topo.add_link(k, e, hop)
        topo.add_group(f"g-{name}", e, consumers_per_group)
        first = k * contents_per_producer + 1
        topo.add_producer(f"p-{name}", k, range(first, first + contents_per_producer), hop)
    topo.validate()
    return topo


def load_topology(path) -> Topology:
    """Generic topology file.

    Lines are ``<u> <v> [delay]`` links plus attachment directives
    ``consumer <name> <router> [consumers]`` and
    ``producer <name> <router> <contents> [delay]``. Producers receive
    consecutive content-id blocks in file order.
    """
    topo = Topology()
    pending_groups, pending_producers = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "consumer":
                pending_groups.append((parts[1], parts[2], int(parts[3]) if len(parts) > 3 else 1))
            elif parts[0] == "producer":
                pending_producers.append((parts[1], parts[2], int(parts[3]),
                                          float(parts[4]) if len(parts) > 4 else DEFAULT_DELAY))
            else:
                if parts[0] == "link":
                    parts = parts[1:]
                if len(parts) not in (2, 3):
                    raise ValueError
                for name in parts[:2]:
                    if name not in topo.router_names:
                        topo.add_router(name)
                topo.add_link(topo.router_id(parts[0]), topo.router_id(parts[1]),
                              float(parts[2]) if len(parts) == 3 else DEFAULT_DELAY)
        except (IndexError, ValueError):
            raise TopologyError(f"{path}:{lineno}: cannot parse {raw!r}") from None
    for name, router, consumers in pending_groups:
        topo.add_group(name, topo.router_id(router), consumers)
    first = 1
    for name, router, contents, d in pending_producers:
        topo.add_producer(name, topo.router_id(router), range(first, first + contents), d)
        first += contents
    topo.validate()
    return topo


def shortest_path_routes(topo: Topology) -> dict[tuple[int, int], Route]:
    """Hop-count shortest path for every (group, producer) pair.

    Among equal-length paths the lexicographically smallest router-id
    sequence wins, so routing is deterministic.
    """
    topo.validate()
    g = topo.graph()
    neighbours = {u: sorted(g.neighbors(u)) for u in g.nodes}
    routes = {}
    for pk, prod in enumerate(topo.producers):
        dist = nx.single_source_shortest_path_length(g, prod.router)
        for gk, grp in enumerate(topo.groups):
            if grp.router not in dist:
                raise TopologyError(f"producer {prod.name} unreachable from {grp.name}")
            path = [grp.router]
            while path[-1] != prod.router:
                here = path[-1]
                path.append(next(v for v in neighbours[here] if dist.get(v) == dist[here] - 1))
            delays = [topo.delay(a, b) for a, b in zip(path, path[1:])] + [prod.delay]
            routes[(gk, pk)] = Route(gk, pk, tuple(path), tuple(delays))
    return routes


def router_avg(routes, weights=None) -> float:
    """Mean number of routers a request crosses to reach its producer
    (hop distance from the consumer minus one), weighted by ``weights``
    keyed like ``routes``; uniform by default. Exact rational sums keep
    equal route lengths from drifting off an integer."""
    total = wsum = Fraction(0)
    for key, route in routes.items():
        w = Fraction(1) if weights is None else Fraction(float(weights.get(key, 0.0)))
        total += w * len(route.routers)
        wsum += w
    if wsum == 0:
        raise ValueError("no routes with positive weight")
    return float(total / wsum)
