import pytest

from dmacsim.baseline import BaselineConfig
from dmacsim.descriptor import DESCRIPTOR_SIZE, encode
from dmacsim.harness import run_scenario, scenario
from dmacsim.memory import PayloadClass
from dmacsim.metrics import latency_probes
from helpers import payload_ok, run_chain


def test_config_shape():
    cfg = BaselineConfig()
    assert cfg.descriptor_beats == 8 and cfg.port_bytes == 4
    with pytest.raises(ValueError):
        BaselineConfig(descriptor_read_bits=100)
    with pytest.raises(ValueError):
        BaselineConfig(descriptor_read_bits=512)


@pytest.mark.parametrize("L", [1, 13, 100])
def test_first_transfer_latencies(L):
    tb, _ = run_chain(BaselineConfig(), [64], latency=L)
    fe = tb.frontend
    assert latency_probes(fe.csr_accepts, [e.cycle for e in fe.fetch_log],
                          tb.transfers) == (10, 2 * L + 20, 1)


def test_serial_narrow_descriptor_reads_and_no_writeback():
    tb, chain = run_chain(BaselineConfig(), [64] * 6, latency=13)
    assert payload_ok(tb, chain)
    desc = [g for g in tb.arbiter.grants if g.payload_class == PayloadClass.DESCRIPTOR.value]
    assert len(desc) == 6 and all(g.beats == 8 for g in desc)
    # each read is granted only after the previous one has fully returned
    for a, b in zip(desc, desc[1:]):
        assert b.cycle > a.cycle + 8 + 2 * 13
    assert not any(g.payload_class == PayloadClass.WRITEBACK.value for g in tb.arbiter.grants)
    for addr, d in chain.entries:
        assert tb.memory.backdoor_read(addr, DESCRIPTOR_SIZE) == encode(d)
    assert tb.frontend.irq_count == 1


@pytest.mark.parametrize("L,n", [(1, 8), (1, 64), (13, 64), (13, 128), (100, 256)])
def test_steady_state_matches_serial_period(L, n):
    # request -> grant 1, 8 narrow beats after 2L, hand-off 12, relaunch 8.
    # The relaunched fetch is requested 8 cycles after the payload read was,
    # so it also waits out whatever is left of that burst on the read channel.
    period = 28 + 2 * L + max(0, n // 8 - 8)
    r = run_scenario(scenario("baseline", L, n)).report
    assert r.steady_state_utilization == pytest.approx((n / 8) / period, abs=1e-9)
