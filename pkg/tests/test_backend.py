import pytest
from hypothesis import given, strategies as st

from dmacsim.backend import Backend, BackendConfig, TransferRecord, TransferState, burst_plan
from dmacsim.descriptor import Descriptor
from dmacsim.memory import beats_for


@given(st.integers(0, 4096), st.integers(0, 4096), st.integers(0, 20_000),
       st.sampled_from([2, 16, 256]))
def test_burst_plan_covers_the_transfer_within_burst_limits(src, dst, length, max_beats):
    plan = burst_plan(src, dst, length, 8, max_beats)
    assert sum(size for _, _, size in plan) == length
    off = 0
    for s, d, size in plan:
        assert (s, d) == (src + off, dst + off)
        assert beats_for(s, size, 8) <= max_beats
        assert beats_for(d, size, 8) <= max_beats
        off += size


def test_burst_plan_examples():
    assert burst_plan(0, 0, 0, 8, 256) == []
    assert burst_plan(0, 0x1000, 4096, 8, 256) == [(0, 0x1000, 2048), (2048, 0x1800, 2048)]
    assert [s for *_, s in burst_plan(1, 0, 4096, 8, 256)] == [2040, 2040, 16]


def test_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(read_to_write_latency=0)
    with pytest.raises(ValueError):
        BackendConfig(max_burst_beats=1)
    with pytest.raises(ValueError):
        BackendConfig(queue_depth=0)


def rig(make_bus, latency=1, **cfg):
    bus = make_bus(latency=latency)
    be = Backend(bus.sim, bus.arbiter, BackendConfig(**cfg))
    done = []
    be.on_done = done.append
    return bus, be, done


def record(i, length, src=0x1000, dst=0x8000):
    return TransferRecord(i, 0, i, 0x100 + 32 * i, Descriptor(length, 0, 0, src, dst))


@pytest.mark.parametrize("L", [1, 13, 100])
def test_single_transfer_timing(make_bus, L):
    bus, be, done = rig(make_bus, L)
    bus.memory.backdoor_write(0x1000, bytes(range(64)))
    rec = record(0, 64)
    bus.at(10, lambda: be.dispatch(rec))
    bus.run()
    # request at 10, grant at 11, data 11 + 2L .. 18 + 2L
    assert rec.first_read_beat == 11 + 2 * L
    assert rec.first_write_beat - rec.first_read_beat == 1
    # 8 write beats from the write grant, then the acknowledgement 2L later
    assert rec.done_cycle == rec.first_write_beat + 7 + 2 * L
    assert rec.state is TransferState.DONE
    assert done == [rec]
    assert bus.memory.backdoor_read(0x8000, 64) == bytes(range(64))


def test_read_to_write_latency_is_configurable(make_bus):
    bus, be, _ = rig(make_bus, read_to_write_latency=4)
    rec = record(0, 16)
    bus.at(0, lambda: be.dispatch(rec))
    bus.run()
    assert rec.first_write_beat - rec.first_read_beat == 4


def test_queue_depth_backpressure_and_in_order_completion(make_bus):
    bus, be, done = rig(make_bus, queue_depth=2)
    recs = [record(i, 64 * (3 - i), src=0x1000 + 0x400 * i, dst=0x8000 + 0x400 * i)
            for i in range(3)]

    def go():
        be.dispatch(recs[0])
        be.dispatch(recs[1])
        assert not be.can_accept()
        with pytest.raises(RuntimeError):
            be.dispatch(recs[2])
    bus.at(0, go)
    bus.run()
    assert done == recs[:2]


def test_zero_length_transfer_retires_in_order(make_bus):
    bus, be, done = rig(make_bus)
    a, z = record(0, 64), record(1, 0)
    bus.at(0, lambda: (be.dispatch(a), be.dispatch(z)))
    bus.run()
    assert done == [a, z]
    assert z.done_cycle == a.done_cycle
    assert z.first_read_beat is None


def test_outstanding_read_bound(make_bus):
    bus, be, _ = rig(make_bus, max_outstanding_reads=3, max_burst_beats=2)
    bus.at(0, lambda: be.dispatch(record(0, 256)))
    bus.run()
    assert be.max_outstanding_seen == 3
    assert len(be.read_bursts) == 16


def test_faulting_read_marks_transfer_failed(make_bus):
    bus, be, done = rig(make_bus)
    rec = record(0, 64, src=bus.memory.capacity - 8)
    bus.at(0, lambda: be.dispatch(rec))
    bus.run()
    assert rec.failed and done == [rec]


def test_state_only_moves_forward():
    rec = record(0, 8)
    rec.advance(TransferState.DISPATCHED)
    with pytest.raises(RuntimeError):
        rec.advance(TransferState.FETCHED)
