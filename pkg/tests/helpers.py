"""Shared test scaffolding."""

from dmacsim.interconnect import RoundRobinArbiter
from dmacsim.memory import Memory, MemoryConfig
from dmacsim.sim_core import Simulator


class Bus:
    """A bare simulator + memory + arbiter with a recording sink handler."""

    def __init__(self, latency=1, capacity=1 << 16, data_width=64):
        self.sim = Simulator()
        self.memory = Memory(MemoryConfig(latency, data_width, capacity), self.sim)
        self.arbiter = RoundRobinArbiter(self.sim, self.memory)
        self.events = []
        self.sim.register("sink", lambda msg: self.events.append((self.sim.now, msg[0], msg[1])))
        self.sim.register("do", lambda fn: fn())

    def at(self, cycle, fn):
        self.sim.schedule(cycle, "do", fn)

    def run(self, max_cycles=100_000):
        while self.sim.pending():
            if self.sim.peek_time() > max_cycles:
                raise AssertionError("bus did not drain")
            self.sim.step()


def main_config(d=4, s=0, **fe):
    from dmacsim.backend import BackendConfig
    from dmacsim.frontend import FrontendConfig
    from dmacsim.testbench import MainConfig
    return MainConfig(FrontendConfig(descriptors_in_flight=d, prefetch_slots=s, **fe),
                      BackendConfig(queue_depth=d))


def run_chain(dmac, sizes, addresses=None, latency=1, irq_last=True, capacity=1 << 20,
              record_trace=False, launch=True):
    """Build, load and run one chain; returns ``(testbench, chain)``."""
    from dmacsim.descriptor import Placement, build_chain
    from dmacsim.memory import MemoryConfig
    from dmacsim.testbench import Testbench

    tb = Testbench(dmac, MemoryConfig(latency, capacity=capacity), record_trace=record_trace)
    src, dst = capacity // 4, capacity // 2
    transfers = []
    for i, n in enumerate(sizes):
        tb.memory.backdoor_write(src, bytes((i + k) & 0xFF for k in range(n)))
        last = i == len(sizes) - 1
        transfers.append((src, dst, n, 1 if (irq_last and last) else 0))
        src += max(n, 64)
        dst += max(n, 64)
    if addresses is None:
        chain = build_chain(transfers, 0x1000)
    else:
        chain = build_chain(transfers, addresses[0], Placement.EXPLICIT, addresses)
    tb.load_chain(chain)
    if launch:
        tb.launch(chain.head_address)
        tb.run()
    return tb, chain


def payload_ok(tb, chain):
    return all(tb.memory.backdoor_read(d.destination, d.length)
               == tb.memory.backdoor_read(d.source, d.length) for d in chain.descriptors)
