import pytest

from dmacsim.memory import (BusTransaction, Kind, Memory, MemoryConfig, OutOfBounds,
                            PayloadClass, beats_for)
from dmacsim.sim_core import Simulator


def txn(kind, address, beats, data=None, **kw):
    return BusTransaction(kind, address, beats, 8, PayloadClass.PAYLOAD, "p", "sink", 0,
                          data=data, **kw)


def test_config_validation():
    assert MemoryConfig().bytes_per_beat == 8
    for bad in (dict(one_way_latency=0), dict(data_width=12), dict(data_width=8),
                dict(data_width=1024), dict(capacity=0)):
        with pytest.raises(ValueError):
            MemoryConfig(**bad)


@pytest.mark.parametrize("addr,length,expected", [
    (0, 8, 1), (0, 9, 2), (4, 8, 2), (7, 1, 1), (0, 0, 0), (0, 2048, 256), (1, 2048, 257),
])
def test_beats_for(addr, length, expected):
    assert beats_for(addr, length, 8) == expected


def test_backdoor_bounds():
    mem = Memory(MemoryConfig(capacity=64))
    mem.backdoor_write(60, b"abcd")
    assert mem.backdoor_read(60, 4) == b"abcd"
    with pytest.raises(OutOfBounds):
        mem.backdoor_write(62, b"abcd")
    with pytest.raises(OutOfBounds):
        mem.backdoor_read(-1, 2)


def test_read_timing_hand_trace(make_bus):
    # L=3: a 4-beat read granted at cycle 10 returns beats at 16..19
    b = make_bus(latency=3)
    b.memory.backdoor_write(0x100, bytes(range(32)))
    t = txn(Kind.READ, 0x100, 4, size=32, watch=(1,))
    b.at(10, lambda: b.memory.service(t, 10))
    b.run()
    assert [(c, what) for c, what, _ in b.events] == [(16, "first"), (17, "beat"), (19, "last")]
    assert t.data == bytes(range(32))
    assert t.beat_cycles(3) == (16, 19)


def test_write_commits_on_last_beat_and_acks_a_round_trip_later(make_bus):
    b = make_bus(latency=3)
    t = txn(Kind.WRITE, 0x40, 2, data=b"x" * 16)
    b.at(10, lambda: b.memory.service(t, 10))
    seen = {}
    b.at(10, lambda: seen.setdefault(10, b.memory.backdoor_read(0x40, 16)))
    b.at(12, lambda: seen.setdefault(12, b.memory.backdoor_read(0x40, 16)))
    b.run()
    assert seen[10] == bytes(16)
    assert seen[12] == b"x" * 16
    assert b.events == [(17, "ack", t)]


def test_out_of_bounds_bus_access_faults_instead_of_raising(bus):
    b = bus
    t = txn(Kind.READ, b.memory.capacity - 8, 2)
    b.at(1, lambda: b.memory.service(t, 1))
    b.run()
    assert t.fault and t.data == bytes(16)
    assert b.memory.faults == [t]


def test_read_snapshot_taken_at_grant(bus):
    b = bus
    b.memory.backdoor_write(0, b"old!" * 2)
    t = txn(Kind.READ, 0, 1)
    b.at(1, lambda: b.memory.service(t, 1))
    b.at(2, lambda: b.memory.backdoor_write(0, b"new!" * 2))
    b.run()
    assert t.data == b"old!" * 2


def test_zero_beat_transaction_rejected():
    with pytest.raises(ValueError):
        txn(Kind.READ, 0, 0)


def test_image_round_trip():
    sim = Simulator()
    a = Memory(MemoryConfig(capacity=1 << 12), sim)
    a.backdoor_write(0x200, b"payload-bytes")
    blob = a.dump_image(0x200, 13)
    b = Memory(MemoryConfig(capacity=1 << 12))
    assert b.load_image(blob) == (0x200, 13)
    assert b.backdoor_read(0x200, 13) == b"payload-bytes"
    with pytest.raises(ValueError):
        b.load_image(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ValueError):
        b.load_image(blob[:-1])
