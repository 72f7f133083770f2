"""Out-of-context testbench: one controller, a round-robin arbiter, one memory.

The controller's descriptor port and payload port both reach the memory
through the arbiter.  Workloads are preloaded through the memory backdoor and
launched with CSR writes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

from .backend import Backend, BackendConfig, TransferRecord
from .baseline import BaselineConfig, BaselineFrontend
from .descriptor import DescriptorChain
from .frontend import Frontend, FrontendConfig
from .interconnect import RoundRobinArbiter
from .memory import Memory, MemoryConfig
from .sim_core import Simulator


@dataclass(frozen=True)
class MainConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)


DmacConfig = Union[MainConfig, BaselineConfig]


class Testbench:
    __test__ = False  # not a pytest class despite the name

    def __init__(self, dmac: DmacConfig, memory: MemoryConfig, record_trace: bool = False):
        self.dmac_config = dmac
        self.sim = Simulator(record_trace=record_trace)
        self.memory = Memory(memory, self.sim)
        self.arbiter = RoundRobinArbiter(self.sim, self.memory)
        self.arbiter.add_port("fe")
        self.arbiter.add_port("be")
        if isinstance(dmac, BaselineConfig):
            bcfg = BackendConfig(data_width=memory.data_width, queue_depth=dmac.in_flight)
            self.backend = Backend(self.sim, self.arbiter, bcfg)
            self.frontend = BaselineFrontend(self.sim, self.arbiter, self.memory,
                                             self.backend, dmac)
        else:
            if dmac.backend.data_width != memory.data_width:
                raise ValueError("backend and memory data widths differ")
            self.backend = Backend(self.sim, self.arbiter, dmac.backend)
            self.frontend = Frontend(self.sim, self.arbiter, self.memory, self.backend,
                                     dmac.frontend)
        self.irq_listeners: list[Callable[[TransferRecord], None]] = []
        self.irq_log: list[tuple[int, int]] = []
        self._launches_pending = 0
        self.busy_retries = 0
        self.frontend.on_irq = self._raise_irq
        self.sim.register("irq", self._deliver_irq)
        self.sim.register("launch", self._on_launch)

    @property
    def is_baseline(self) -> bool:
        return isinstance(self.dmac_config, BaselineConfig)

    def load_chain(self, chain: DescriptorChain) -> None:
        chain.load(self.memory.backdoor_write)

    def launch(self, head: int, at: int = 0) -> None:
        """Schedule a CSR write of ``head``; retried every cycle while busy."""
        self._launches_pending += 1
        self.sim.schedule(at, "launch", head)

    def _on_launch(self, head: int) -> None:
        if self.frontend.csr_write(head):
            self._launches_pending -= 1
        else:
            self.busy_retries += 1
            self.sim.after(1, "launch", head)

    def _raise_irq(self, rec: TransferRecord) -> None:
        self.sim.schedule(self.sim.now, "irq", rec)

    def _deliver_irq(self, rec: TransferRecord) -> None:
        self.irq_log.append((self.sim.now, rec.descriptor_address))
        for fn in list(self.irq_listeners):
            fn(rec)

    @property
    def idle(self) -> bool:
        return (not self._launches_pending and not self.frontend.busy
                and self.arbiter.pending() == 0)

    def run(self, max_cycles: int = 50_000_000) -> int:
        return self.sim.run_until(lambda: self.idle, max_cycles)

    @property
    def transfers(self) -> list[TransferRecord]:
        return self.frontend.transfers
