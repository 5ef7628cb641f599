import pytest
from hypothesis import given
from hypothesis import strategies as st

from selcache.model import (
    NOT_NOMINATED,
    DataPacket,
    PacketId,
    PacketIndex,
    RequestPacket,
    packet_order,
)

packets = st.builds(PacketId, st.integers(1, 50), st.integers(1, 50))


def test_packet_order_examples():
    assert packet_order(PacketId(1, 2), PacketId(1, 3)) == -1
    assert packet_order(PacketId(2, 1), PacketId(1, 9)) == 1
    assert packet_order(PacketId(5, 5), PacketId(5, 5)) == 0


@given(packets, packets)
def test_packet_order_is_antisymmetric_and_matches_sorting(a, b):
    assert packet_order(a, b) == -packet_order(b, a)
    assert (packet_order(a, b) < 0) == (a < b)


@given(packets, packets, packets)
def test_packet_order_is_transitive(a, b, c):
    if packet_order(a, b) <= 0 and packet_order(b, c) <= 0:
        assert packet_order(a, c) <= 0


@pytest.mark.parametrize("content,index", [(0, 1), (1, 0), (-3, 2)])
def test_packet_id_rejects_out_of_range(content, index):
    with pytest.raises(ValueError):
        PacketId(content, index)


def test_nf_defaults_and_bounds():
    assert RequestPacket(PacketId(1)).nf == NOT_NOMINATED
    assert DataPacket(PacketId(1)).size_units == 1
    with pytest.raises(ValueError):
        RequestPacket(PacketId(1), nf=-2)
    with pytest.raises(ValueError):
        DataPacket(PacketId(1), nf=-5)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=30), st.data())
def test_packet_index_round_trip_and_order(sizes, data):
    idx = PacketIndex(sizes)
    assert idx.total == sum(sizes)
    c = data.draw(st.integers(1, len(sizes)))
    i = data.draw(st.integers(1, sizes[c - 1]))
    p = PacketId(c, i)
    assert idx.packet(idx.key(p)) == p
    keys = [idx.key(PacketId(k + 1, j + 1)) for k, s in enumerate(sizes) for j in range(s)]
    assert keys == list(range(idx.total))


def test_packet_index_rejects_packets_outside_catalog():
    idx = PacketIndex([3, 2])
    with pytest.raises(ValueError):
        idx.key(PacketId(2, 3))
    with pytest.raises(ValueError):
        idx.key(PacketId(3, 1))
    with pytest.raises(ValueError):
        PacketIndex([1, 0])
