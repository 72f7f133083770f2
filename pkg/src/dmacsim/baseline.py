"""Serialized-fetch reference controller.

Models a conventional descriptor DMAC of the LogiCORE kind: a 32-bit
descriptor port reading 256 of the 416 descriptor bits (eight narrow beats,
each taking a full memory beat slot), one descriptor read at a time, and the
next descriptor requested only after the current one has been handed to the
payload engine.  The payload engine is the same :class:`~dmacsim.backend.Backend`
as the main controller.

The fixed pipeline constants are calibration values, not published figures:

* ``csr_to_request = 10`` and ``descriptor_to_backend = 11`` give
  i-rf = 10 and rf-rb = 2L + 20 (22 cycles in ideal memory);
* ``relaunch_cycles`` is the gap between handing a descriptor to the engine
  and requesting the next one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .backend import Backend, TransferRecord
from .descriptor import END_OF_CHAIN, decode, next_field
from .frontend import FetchEvent
from .interconnect import RoundRobinArbiter
from .memory import BusTransaction, Kind, Memory, PayloadClass
from .sim_core import Simulator


@dataclass(frozen=True)
class BaselineConfig:
    descriptor_bits: int = 416
    descriptor_read_bits: int = 256
    descriptor_port_width: int = 32
    in_flight: int = 4
    csr_queue_depth: int = 4
    csr_to_request: int = 10
    descriptor_to_backend: int = 11
    relaunch_cycles: int = 8

    def __post_init__(self):
        if self.descriptor_read_bits % self.descriptor_port_width:
            raise ValueError("descriptor read must be a whole number of port beats")
        if self.descriptor_read_bits > self.descriptor_bits:
            raise ValueError("cannot read more descriptor bits than exist")
        if self.in_flight < 1:
            raise ValueError("in_flight must be >= 1")

    @property
    def descriptor_beats(self) -> int:
        return self.descriptor_read_bits // self.descriptor_port_width

    @property
    def port_bytes(self) -> int:
        return self.descriptor_port_width // 8


class BaselineFrontend:
    """Strictly sequential descriptor processing; never speculates."""

    def __init__(self, sim: Simulator, arbiter: RoundRobinArbiter, memory: Memory,
                 backend: Backend, config: BaselineConfig, name: str = "fe"):
        self.sim = sim
        self.arbiter = arbiter
        self.memory = memory
        self.backend = backend
        self.config = config
        self.name = name
        self.port = arbiter.ensure_port(name)
        self.csr_queue: deque[tuple[int, int]] = deque()   # (head, ready cycle)
        self._chain = -1
        self._chains = 0
        self._position = 0
        self._reading = False
        self._next_addr: int | None = None
        self.handoff: deque[tuple[int, TransferRecord]] = deque()
        self.transfers: list[TransferRecord] = []
        self.fetch_log: list[FetchEvent] = []
        self.csr_accepts: list[tuple[int, int]] = []
        self.discarded: list = []
        self.faults: list[tuple[int, int, str]] = []
        self.max_outstanding_reads = 0
        self.hits = self.misses = self.irq_count = 0
        self.on_irq = lambda rec: None
        backend.on_done = self.on_backend_done
        backend.on_slot_free = self._try_dispatch
        sim.register(name, self._on_event)

    def csr_write(self, head_address: int) -> bool:
        if len(self.csr_queue) >= self.config.csr_queue_depth:
            return False
        now = self.sim.now
        self.csr_accepts.append((now, head_address))
        self.csr_queue.append((head_address, now + self.config.csr_to_request))
        idle = not (self._reading or self._next_addr is not None or self.handoff)
        if idle and len(self.csr_queue) == 1:
            self.sim.schedule(now + self.config.csr_to_request, self.name, ("fetch",))
        return True

    @property
    def busy(self) -> bool:
        return bool(self.csr_queue or self._reading or self._next_addr is not None
                    or self.handoff or self.backend.busy)

    def _fetch(self, addr: int) -> None:
        cfg = self.config
        self._reading = True
        txn = BusTransaction(Kind.READ, addr, cfg.descriptor_beats, cfg.port_bytes,
                             PayloadClass.DESCRIPTOR, self.port, self.name, self.sim.now,
                             size=cfg.descriptor_beats * cfg.port_bytes, tag=addr)
        self.fetch_log.append(FetchEvent(self.sim.now, addr, self._chain, self._position,
                                         False, False, None))
        self.arbiter.request(self.port, txn)
        self.max_outstanding_reads = max(self.max_outstanding_reads, 1)

    def _on_event(self, msg) -> None:
        what = msg[0]
        now = self.sim.now
        if what == "fetch":
            if self._reading:
                return
            if self._next_addr is not None:
                addr, self._next_addr = self._next_addr, None
                self._fetch(addr)
            elif self.csr_queue and self.csr_queue[0][1] <= now:
                head, _ = self.csr_queue.popleft()
                self._chain = self._chains
                self._chains += 1
                self._position = 0
                self._fetch(head)
        elif what == "last":
            self._on_descriptor(msg[1])
        elif what == "dispatch":
            self._try_dispatch()
        # "first" beats and write acks carry nothing for the baseline

    def _on_descriptor(self, txn: BusTransaction) -> None:
        now = self.sim.now
        self._reading = False
        if txn.fault:
            self.faults.append((now, txn.address, "bus fault on descriptor read"))
            self._schedule_next_chain(now + 1)
            return
        raw = bytes(txn.data)
        rec = TransferRecord(len(self.transfers), self._chain, self._position,
                             txn.address, decode(raw))
        rec.fetch_issue_cycle = txn.issue_cycle
        rec.next_known_cycle = now
        rec.fetched_cycle = now
        self._position += 1
        self.transfers.append(rec)
        ready = now + 1 + self.config.descriptor_to_backend
        self.handoff.append((ready, rec))
        self.sim.schedule(ready, self.name, ("dispatch",))
        nxt = next_field(raw)
        if nxt != END_OF_CHAIN:
            self._next_addr = nxt
        # the next fetch is requested once this descriptor has been handed off

    def _schedule_next_chain(self, at: int) -> None:
        if self.csr_queue:
            self.sim.schedule(max(at, self.csr_queue[0][1]), self.name, ("fetch",))

    def _try_dispatch(self) -> None:
        now = self.sim.now
        while self.handoff and self.handoff[0][0] <= now and self.backend.can_accept():
            _, rec = self.handoff.popleft()
            self.backend.dispatch(rec)
            at = now + self.config.relaunch_cycles
            if self._next_addr is not None:
                self.sim.schedule(at, self.name, ("fetch",))
            elif not self._reading:
                self._schedule_next_chain(at)

    def on_backend_done(self, record: TransferRecord) -> None:
        record.completion_cycle = self.sim.now
        if record.failed:
            self.faults.append((self.sim.now, record.descriptor_address, "transfer failed"))
        elif record.descriptor.irq:
            self.irq_count += 1
            self.on_irq(record)
