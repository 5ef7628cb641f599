import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from selcache.engine import RouterCounters, RunCounters
from selcache.metrics import compute_report, sd_stats, stack_distance_array, stack_distances

STREAM = [4, 5, 1, 3, 2, 7, 2, 3, 1, 6]


def naive_sd(stream):
    out = []
    for j, x in enumerate(stream):
        prev = [i for i in range(j) if stream[i] == x]
        out.append(None if not prev else len(set(stream[prev[-1] + 1:j])))
    return out


def test_worked_stream():
    sds = stack_distances(STREAM)
    assert sds[8] == 3  # content 1: 2, 3, 7 in between
    assert sds[6] == 1  # content 2: only 7 in between
    assert sds[7] == 2
    assert [d for d in sds if d is not None] == [1, 2, 3]


def test_adjacent_repeat():
    assert stack_distances(["x", "x"]) == [None, 0]


def test_stats_of_worked_stream():
    s = sd_stats(stack_distances(STREAM))
    assert (s.min_sd, s.max_sd, s.avg_sd) == (1, 3, 2.0)
    assert s.undefined_count == 7 and s.defined_count == 3
    assert s.histogram == {1: 1, 2: 1, 3: 1}


def test_identical_stream():
    s = sd_stats(stack_distances([9] * 6))
    assert (s.min_sd, s.max_sd, s.avg_sd) == (0, 0, 0)


def test_round_robin():
    m = 7
    sds = stack_distances(list(range(m)) * 5)
    assert set(d for d in sds if d is not None) == {m - 1}


def test_absent_stats():
    for s in (sd_stats([None, None]), sd_stats(stack_distance_array([1, 2, 3])), sd_stats([])):
        assert s.absent and s.min_sd is None and s.avg_sd is None


def test_array_and_list_forms_agree():
    rng = np.random.default_rng(0)
    stream = rng.integers(0, 30, 2000).tolist()
    a = sd_stats(stack_distance_array(stream))
    b = sd_stats(stack_distances(stream))
    assert (a.min_sd, a.max_sd, a.histogram, a.undefined_count) == (b.min_sd, b.max_sd, b.histogram, b.undefined_count)
    assert abs(a.avg_sd - b.avg_sd) < 1e-12


@given(st.lists(st.integers(0, 12), max_size=120))
def test_matches_naive_count(stream):
    assert stack_distances(stream) == naive_sd(stream)


@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=60))
def test_stats_ordering(stream):
    s = sd_stats(stack_distances(stream))
    if not s.absent:
        assert s.min_sd <= s.avg_sd <= s.max_sd


def _counters(**kw):
    base = dict(scenario="s", seed=1, duration=1.0, route_lengths=[3], route_requests=[10])
    base.update(kw)
    return RunCounters(**base)


def test_report_without_caches():
    c = _counters(r_entered=10, r_producer=10, hop_sum=40, traffic_sum=30,
                  routers=[RouterCounters("r0", "edge", "NONE", 0)])
    rep = compute_report(c)
    assert (rep.hit_net, rep.h_red, rep.t_red) == (0.0, 1.0, 1.0)
    assert rep.e_avg is None


def test_report_edge_hits_only():
    # every request served by the edge router: one hop, no counted traffic
    c = _counters(r_entered=10, r_producer=0, hop_sum=10, traffic_sum=0,
                  routers=[RouterCounters("r0", "edge", "LRU", 4, evictions=2)])
    rep = compute_report(c)
    assert rep.hit_net == 1.0
    assert rep.h_red == 1 / 4
    assert rep.t_red == 0.0
    assert rep.e_avg == 0.5
    assert rep.per_cache_hits == {"r0": None}


def test_report_empty_run():
    rep = compute_report(_counters(route_requests=[0]))
    assert rep.hit_net is None and rep.h_red is None and rep.t_red is None
