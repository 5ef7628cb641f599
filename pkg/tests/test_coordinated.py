import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from selcache.coordinated import NW_TIMER, CoordCache, Forward, ProtocolViolation, Serve
from selcache.model import DataPacket, PacketId, RequestPacket
from selcache.selection import Phase


def select(cache, p, now=0.0):
    """Nominate ``p`` and deliver its data straight back."""
    hit, nf = cache.request(p, -1, now)
    assert (hit, nf) == (False, 0)
    assert cache.data(p, 0, now) == -1


def fill_and_restart(c, **kw):
    """A cache that froze once over packets 1..c and has just re-entered
    the selecting phase with every old packet stale."""
    cache = CoordCache(c, frozen_period=10, **kw)
    for p in range(1, c + 1):
        select(cache, p)
    assert cache.phase is Phase.FROZEN
    cache.on_frozen_timer(10.0)
    return cache


def test_nomination_sets_nf_zero_and_opens_window():
    cache = CoordCache(4)
    assert cache.request(PacketId(1), -1, 0.0) == (False, 0)
    assert cache.nw == 1 and cache.rs == 4


def test_window_of_one_blocks_second_nomination():
    cache = CoordCache(4, nw_threshold=1)
    cache.request(1, -1, 0.0)
    assert cache.request(2, -1, 0.0) == (False, -1)
    assert cache.nw == 1


def test_nominated_request_is_counted_not_renominated():
    cache = CoordCache(4)
    assert cache.request(1, 0, 0.0) == (False, 1)
    assert cache.request(2, 3, 0.0) == (False, 4)
    assert cache.nw == 0


def test_data_decrements_and_passes_unnominated():
    cache = CoordCache(4)
    assert cache.data(1, 2, 0.0) == 1
    assert cache.data(1, -1, 0.0) == -1
    assert cache.writes == 0 and 1 not in cache


def test_write_fills_pointer_slot():
    cache = CoordCache(4)
    select(cache, 11)
    select(cache, 12)
    assert cache.pointer == 3
    select(cache, 13)
    assert cache.packet_at(3) == 13 and cache.protected(3)
    assert cache.pointer == 4
    assert (cache.us, cache.rs, cache.nw) == (1, 1, 0)


def test_write_into_occupied_unprotected_slot_evicts_once():
    cache = fill_and_restart(3)
    assert cache.evictions == 0
    select(cache, 99, 11.0)
    assert cache.evictions == 1
    assert cache.packet_at(1) == 99 and 1 not in cache


def test_filling_the_last_selection_freezes():
    cache = CoordCache(2, frozen_period=60)
    select(cache, 1, 5.0)
    assert cache.phase is Phase.SELECTING
    select(cache, 2, 7.0)
    assert cache.phase is Phase.FROZEN
    assert cache.frozen_until == 67.0
    assert cache.pointer == 3


def _fig6c():
    """Eight slots: 1-3 written, 6 re-selected, pointer at 4."""
    cache = fill_and_restart(8)
    for p in (101, 102, 103):
        select(cache, p, 11.0)
    assert cache.request(6, -1, 11.0) == (True, -1)
    assert [cache.protected(s) for s in range(1, 9)] == [1, 1, 1, 0, 0, 1, 0, 0]
    assert cache.pointer == 4 and cache.us == 4
    return cache


def test_collision_before_pointer_defers_selection():
    cache = _fig6c()
    rs = cache.rs
    hit, nf = cache.request(102, 1, 12.0)
    assert (hit, nf) == (True, 1)
    assert not cache.protected(2)
    assert cache.us == 5 and cache.rs == rs


def test_collision_after_pointer_reopens_selection():
    cache = _fig6c()
    rs = cache.rs
    assert cache.request(6, 0, 12.0) == (True, 0)
    assert not cache.protected(6)
    assert cache.us == 5 and cache.rs == rs + 1


def test_reselection_after_pointer_consumes_a_selection():
    cache = fill_and_restart(4)
    assert cache.request(3, -1, 11.0) == (True, -1)
    assert cache.protected(3)
    assert (cache.us, cache.rs, cache.pointer) == (3, 3, 1)


def test_reselecting_slot_one_moves_pointer_past_it():
    cache = fill_and_restart(4)
    assert cache.pointer == 1
    cache.request(1, -1, 11.0)
    assert cache.pointer == 2
    select(cache, 50, 11.0)
    assert cache.packet_at(2) == 50 and cache.packet_at(1) == 1


def test_nominated_hit_on_stale_slot_serves_without_reprotecting():
    cache = fill_and_restart(3)
    assert cache.request(2, 0, 11.0) == (True, 0)
    assert not cache.protected(2)
    assert cache.us == 3 and cache.collisions == 0


def test_frozen_timer_keeps_packets_and_clears_bits():
    cache = CoordCache(3, frozen_period=10)
    for p in (7, 8, 9):
        select(cache, p)
    cache.on_frozen_timer(9.99)
    assert cache.phase is Phase.FROZEN
    cache.on_frozen_timer(10.0)
    assert cache.phase is Phase.SELECTING
    assert (cache.us, cache.rs, cache.pointer) == (3, 3, 1)
    assert all(p in cache for p in (7, 8, 9))
    assert not any(cache.protected(s) for s in (1, 2, 3))
    cache.on_frozen_timer(10.0)
    assert cache.phase is Phase.SELECTING


def test_frozen_collision_is_refilled_at_lowest_unprotected_slot():
    cache = CoordCache(3)
    for p in (1, 2, 3):
        select(cache, p)
    cache.request(3, 0, 1.0)
    cache.request(2, 2, 1.0)
    assert cache.us == 2 and cache.phase is Phase.FROZEN
    select(cache, 40, 2.0)
    assert cache.packet_at(2) == 40 and cache.protected(2)
    assert cache.us == 1


def test_frozen_cache_nominates_only_for_unprotected_slots():
    cache = CoordCache(2, nw_threshold=2)
    select(cache, 1)
    select(cache, 2)
    assert cache.request(5, -1, 1.0) == (False, -1)
    cache.request(1, 0, 1.0)
    assert cache.request(5, -1, 1.0) == (False, 0)
    assert cache.request(6, -1, 1.0) == (False, -1)


def test_nw_timer_halves_stuck_window():
    armed = []
    cache = CoordCache(4, nw_timeout=0.5, schedule=lambda t, c, kind: armed.append((t, kind)))
    cache.request(1, -1, 1.0)
    assert armed == [(1.5, NW_TIMER)]
    cache.on_nw_timer(1.4)
    assert cache.nw == 1
    cache.on_nw_timer(1.5)
    assert cache.nw == 0
    assert cache.request(2, -1, 2.0) == (False, 0)


def test_nw_timer_at_zero_is_a_no_op():
    cache = CoordCache(4)
    cache.on_nw_timer(100.0)
    assert cache.nw == 0


def test_write_restarts_nw_timer():
    armed = []
    cache = CoordCache(4, nw_threshold=2, nw_timeout=1.0, schedule=lambda t, c, kind: armed.append(t))
    cache.request(1, -1, 0.0)
    cache.request(2, -1, 0.2)
    cache.data(1, 0, 0.5)
    assert cache.nw_deadline == 1.5
    cache.on_nw_timer(1.0)
    assert cache.nw == 1
    cache.data(2, 0, 0.9)
    assert cache.nw == 0 and cache.nw_deadline == math.inf


def test_data_for_full_protected_cache_is_a_violation():
    cache = CoordCache(1)
    select(cache, 1)
    with pytest.raises(ProtocolViolation) as err:
        cache.data(2, 0, 1.0)
    assert err.value.diagnostics["US"] == 0


def test_nf_below_minus_one_is_a_violation():
    cache = CoordCache(2)
    with pytest.raises(ProtocolViolation):
        cache.request(1, -2, 0.0)


def test_zero_capacity_never_nominates():
    cache = CoordCache(0)
    assert cache.request(1, -1, 0.0) == (False, -1)


def test_packet_level_wrappers():
    cache = CoordCache(2)
    out = cache.on_request(RequestPacket(PacketId(3, 1)))
    assert isinstance(out, Forward) and out.request.nf == 0
    data = cache.on_data(DataPacket(PacketId(3, 1), nf=0))
    assert data.nf == -1
    served = cache.on_request(RequestPacket(PacketId(3, 1)))
    assert isinstance(served, Serve) and served.data.nf == -1


ops = st.lists(
    st.one_of(
        st.tuples(st.just("req"), st.integers(0, 9), st.integers(-1, 3)),
        st.tuples(st.just("deliver"), st.integers(0, 20)),
        st.tuples(st.just("frozen")),
        st.tuples(st.just("nw")),
    ),
    max_size=150,
)


@given(ops, st.integers(1, 5), st.integers(1, 3))
def test_protocol_invariants_hold_under_random_traffic(script, c, nw_th):
    cache = CoordCache(c, nw_threshold=nw_th, frozen_period=5, nw_timeout=1)
    pending: list = []
    now = 0.0
    selecting_writes = 0
    for op in script:
        now += 0.25
        if op[0] == "req":
            _, p, nf = op
            was_selecting = cache.phase is Phase.SELECTING
            hit, out = cache.request(p, nf, now)
            if not hit and nf == -1 and out == 0:
                pending.append(p)
                assert cache.nw <= nw_th
                if was_selecting:
                    assert cache.nw <= cache.rs
            if nf >= 0:
                assert out >= nf
        elif op[0] == "deliver" and pending:
            p = pending.pop(op[1] % len(pending))
            selecting = cache.phase is Phase.SELECTING
            cache.data(p, 0, now)
            selecting_writes = selecting_writes + 1 if selecting else 0
        elif op[0] == "frozen":
            now = max(now, cache.frozen_until) if cache.frozen_until < math.inf else now
            was_frozen = cache.phase is Phase.FROZEN
            cache.on_frozen_timer(now)
            if was_frozen and cache.phase is Phase.SELECTING:
                selecting_writes = 0
        elif op[0] == "nw":
            before = cache.nw
            cache.on_nw_timer(max(now, cache.nw_deadline) if cache.nw_deadline < math.inf else now)
            # nominations written off by the timer are treated as lost
            for _ in range(before - cache.nw):
                pending.pop(0)
        cache._verify_full()
        assert cache.us == bytes(cache.pb).count(0)
        assert cache.nw == len(pending)
        assert len(cache.where) <= c
        # liveness: a selecting pass ends after at most c written selections
        assert selecting_writes <= c
