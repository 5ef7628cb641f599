import hashlib

import networkx as nx
import pytest

from selcache.topology import (
    ABILENE_SHA256,
    TopologyError,
    abilene_path,
    build_abilene,
    build_binary_tree,
    load_adjacency,
    load_topology,
    router_avg,
    shortest_path_routes,
)


@pytest.mark.parametrize("levels,routers,edges", [(2, 3, 2), (3, 7, 4), (4, 15, 8), (5, 31, 16)])
def test_tree_sizes(levels, routers, edges):
    t = build_binary_tree(levels)
    assert t.n_routers == routers
    assert len(t.edge_routers()) == edges
    assert len(t.groups) == edges
    assert len(t.producers) == 1 and t.producers[0].router == 0
    assert all(g.consumers == 125 for g in t.groups)


def test_tree_needs_two_levels():
    with pytest.raises(TopologyError):
        build_binary_tree(1)


@pytest.mark.parametrize("levels", [2, 3, 4, 5])
def test_tree_routes_run_leaf_to_root(levels):
    t = build_binary_tree(levels)
    routes = shortest_path_routes(t)
    assert len(routes) == len(t.groups)
    for (g, _), r in routes.items():
        assert len(r) == levels
        assert r.routers[0] == t.groups[g].router
        assert r.routers[-1] == 0
        assert len(r.delays) == len(r.routers)
    assert router_avg(routes) == levels


def test_abilene_shape_and_checksum():
    digest = hashlib.sha256(abilene_path().read_bytes()).hexdigest()
    assert digest == ABILENE_SHA256
    t = build_abilene()
    assert len(t.core_routers()) == 11 and len(t.edge_routers()) == 11
    assert len(t.producers) == 11 and t.n_contents == 1100
    assert all(g.consumers == 100 for g in t.groups)
    assert nx.is_connected(t.graph())
    assert len(load_adjacency(abilene_path())) == 14


def test_abilene_routes_are_simple_shortest_paths():
    t = build_abilene()
    g = t.full_graph()
    for (gi, pi), r in shortest_path_routes(t).items():
        assert len(set(r.routers)) == len(r.routers)
        assert r.routers[0] == t.groups[gi].router
        assert r.routers[-1] == t.producers[pi].router
        expected = nx.shortest_path_length(g, t.groups[gi].router, ("producer", pi))
        assert len(r.routers) == expected


def test_routing_ties_pick_lowest_ids(tmp_path):
    # square a-b-d, a-c-d: two equal paths from a to d
    path = tmp_path / "sq.txt"
    path.write_text("a b\na c\nb d\nc d\nconsumer g a 10\nproducer p d 5\n")
    t = load_topology(path)
    r = shortest_path_routes(t)[(0, 0)]
    assert [t.router_names[x] for x in r.routers] == ["a", "b", "d"]


def test_modified_abilene_file_is_rejected(tmp_path):
    bad = tmp_path / "abilene.txt"
    bad.write_text("Seattle Denver oops\n")
    with pytest.raises(TopologyError):
        load_adjacency(bad)
    with pytest.raises(TopologyError):
        load_adjacency(tmp_path / "missing.txt") if False else load_adjacency(_empty(tmp_path))


def _empty(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n")
    return p


def test_disconnected_topology_rejected(tmp_path):
    path = tmp_path / "split.txt"
    path.write_text("a b\nc d\nconsumer g a\nproducer p d 3\n")
    with pytest.raises(TopologyError):
        load_topology(path)


def test_topology_file_parse_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("a b c d e\n")
    with pytest.raises(TopologyError):
        load_topology(path)


def test_router_avg_weights():
    t = build_binary_tree(3)
    routes = shortest_path_routes(t)
    w = {k: (1.0 if k[0] == 0 else 0.0) for k in routes}
    assert router_avg(routes, w) == 3
    with pytest.raises(ValueError):
        router_avg(routes, {k: 0.0 for k in routes})
