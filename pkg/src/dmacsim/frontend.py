"""Descriptor frontend with speculative descriptor prefetching.

The frontend owns one manager port.  Reads on it fetch descriptors, writes
on it are completion markers.  Its bookkeeping follows the hardware:

* a CSR queue of chain heads waiting to be launched;
* a list of *live* descriptor reads in issue order.  The oldest is the
  architectural fetch, the rest are speculation slots predicting
  ``previous + 32``;
* a hand-off queue of decoded descriptors waiting for a backend slot.

Live reads plus queued hand-offs share ``descriptors_in_flight`` credits.
Speculative reads additionally need one of ``prefetch_slots`` slot credits,
returned when the slot is committed.

When the beat carrying a descriptor's ``next`` field arrives, the field is
compared with the oldest speculation slot.  On a match the slot is
committed.  On a mismatch every slot is discarded, which frees their
credits at once, and the correct read is issued in the same cycle.  Data
returning for discarded slots still occupies the bus and is dropped.

All read-issue decisions run in the late phase of a cycle so they see every
beat that arrived in that cycle.  At most one read is issued per cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .backend import Backend, TransferRecord, TransferState
from .descriptor import (DESCRIPTOR_SIZE, END_OF_CHAIN, decode, next_field)
from .interconnect import RoundRobinArbiter
from .memory import BusTransaction, Kind, Memory, PayloadClass, beats_for
from .sim_core import PHASE_LATE, Simulator

CSR_HEAD = 0x00
CSR_STATUS = 0x08

MARKER = b"\xff" * 8


@dataclass(frozen=True)
class FrontendConfig:
    descriptors_in_flight: int = 4
    prefetch_slots: int = 0
    csr_queue_depth: int = 4
    csr_to_request: int = 3
    decode_to_backend: int = 1

    def __post_init__(self):
        if self.descriptors_in_flight < 1:
            raise ValueError("descriptors_in_flight must be >= 1")
        if self.prefetch_slots < 0:
            raise ValueError("prefetch_slots must be >= 0")
        if self.csr_queue_depth < 1:
            raise ValueError("csr_queue_depth must be >= 1")
        if self.csr_to_request < 1 or self.decode_to_backend < 0:
            raise ValueError("invalid pipeline delays")


class SlotState(Enum):
    OUTSTANDING = "outstanding"
    COMMITTED = "committed"
    DISCARDED = "discarded"


@dataclass(eq=False)
class DescriptorFetch:
    """One descriptor read; speculative ones double as speculation slots."""

    address: int
    chain: int
    position: int
    speculative: bool
    issue_cycle: int
    state: SlotState = SlotState.OUTSTANDING
    after_miss: bool = False
    next_known: int | None = None
    txn: BusTransaction | None = None

    @property
    def predicted_address(self) -> int:
        return self.address


@dataclass
class _Chain:
    ident: int
    head: int
    accept_cycle: int
    ready_cycle: int


@dataclass
class FetchEvent:
    """Trace entry for every descriptor read issued."""

    cycle: int
    address: int
    chain: int
    position: int
    speculative: bool
    after_miss: bool
    trigger_cycle: int | None


class Frontend:
    def __init__(self, sim: Simulator, arbiter: RoundRobinArbiter, memory: Memory,
                 backend: Backend, config: FrontendConfig, name: str = "fe"):
        self.sim = sim
        self.arbiter = arbiter
        self.memory = memory
        self.backend = backend
        self.config = config
        self.name = name
        self.port = arbiter.ensure_port(name)
        self.bytes_per_beat = memory.config.bytes_per_beat
        self._next_beat = (DESCRIPTOR_SIZE // 2 - 1) // self.bytes_per_beat
        self._desc_beats = beats_for(0, DESCRIPTOR_SIZE, self.bytes_per_beat)

        self.csr_queue: deque[_Chain] = deque()
        self._chain_ids = 0
        self._chain: _Chain | None = None          # chain whose next pointers are being followed
        self._position = 0                         # chain position of the next fetch to issue
        self._spec_base: int | None = None         # address of the youngest read in the chain
        self._pending_arch: tuple[int, int] | None = None  # (address, trigger cycle)
        self._pending_after_miss = False
        self.live: list[DescriptorFetch] = []
        self.handoff: deque[tuple[int, TransferRecord]] = deque()
        self._last_issue = -1
        self._issue_at: set[int] = set()
        self._writebacks = 0

        self.transfers: list[TransferRecord] = []
        self.fetch_log: list[FetchEvent] = []
        self.discarded: list[DescriptorFetch] = []
        self.faults: list[tuple[int, int, str]] = []
        self.csr_accepts: list[tuple[int, int]] = []
        self.hits = 0
        self.misses = 0
        self.irq_count = 0
        self.max_in_flight = 0
        self.max_speculative = 0
        self.on_irq: Callable[[TransferRecord], None] = lambda rec: None

        backend.on_done = self.on_backend_done
        backend.on_slot_free = self._try_dispatch
        sim.register(name, self._on_event)

    # ------------------------------------------------------------------ CSR
    def csr_write(self, head_address: int) -> bool:
        """Launch a chain; returns False (busy) when the CSR queue is full."""
        if len(self.csr_queue) >= self.config.csr_queue_depth:
            return False
        now = self.sim.now
        ch = _Chain(self._chain_ids, head_address, now, now + self.config.csr_to_request)
        self._chain_ids += 1
        self.csr_queue.append(ch)
        self.csr_accepts.append((now, head_address))
        self._request_issue(ch.ready_cycle)
        return True

    def csr_read(self, offset: int) -> int:
        if offset == CSR_STATUS:
            return int(self.busy) | (len(self.csr_queue) << 8)
        if offset == CSR_HEAD:
            return self.csr_queue[-1].head if self.csr_queue else 0
        raise KeyError(f"no CSR at offset {offset:#x}")

    def mmio_write(self, offset: int, value: int) -> bool:
        if offset != CSR_HEAD:
            raise KeyError(f"CSR offset {offset:#x} is not writable")
        return self.csr_write(value)

    @property
    def busy(self) -> bool:
        return bool(self.csr_queue or self._chain or self.live or self.handoff
                    or self.backend.busy or self._writebacks)

    # --------------------------------------------------------------- credits
    @property
    def in_flight(self) -> int:
        return len(self.live) + len(self.handoff)

    @property
    def speculative_outstanding(self) -> int:
        return sum(1 for f in self.live if f.speculative and f.state is SlotState.OUTSTANDING)

    def _check_bounds(self) -> None:
        n, s = self.in_flight, self.speculative_outstanding
        assert n <= self.config.descriptors_in_flight, f"in-flight {n} exceeds bound"
        assert s <= self.config.prefetch_slots, f"speculative {s} exceeds bound"
        self.max_in_flight = max(self.max_in_flight, n)
        self.max_speculative = max(self.max_speculative, s)

    # ----------------------------------------------------------------- issue
    def _request_issue(self, at: int) -> None:
        at = max(at, self.sim.now)
        if at not in self._issue_at:
            self._issue_at.add(at)
            self.sim.schedule(at, self.name, ("issue",), phase=PHASE_LATE)

    def _credit(self) -> bool:
        return self.in_flight < self.config.descriptors_in_flight

    def _choose(self):
        """Next read to issue as ``(address, speculative)`` or None."""
        if not self._credit():
            return None
        if self._pending_arch is not None:
            return self._pending_arch[0], False
        if self._chain is None:
            if self.csr_queue and self.csr_queue[0].ready_cycle <= self.sim.now:
                return self.csr_queue[0].head, False
            return None
        if (self.config.prefetch_slots and self._spec_base is not None
                and self.speculative_outstanding < self.config.prefetch_slots):
            addr = self._spec_base + DESCRIPTOR_SIZE
            if self.memory.in_bounds(addr, DESCRIPTOR_SIZE):
                return addr, True
        return None

    def prefetch_issue(self) -> None:
        now = self.sim.now
        self._issue_at.discard(now)
        if self._last_issue == now:
            self._request_issue(now + 1)
            return
        choice = self._choose()
        if choice is None:
            return
        addr, speculative = choice
        trigger = None
        after_miss = False
        if not speculative:
            if self._pending_arch is not None:
                trigger = self._pending_arch[1]
                after_miss = self._pending_after_miss
                self._pending_arch = None
                self._pending_after_miss = False
            else:
                ch = self.csr_queue.popleft()
                self._chain = ch
                self._position = 0
        assert self._chain is not None
        fetch = DescriptorFetch(addr, self._chain.ident, self._position, speculative, now,
                                after_miss=after_miss)
        self._position += 1
        self._spec_base = addr
        txn = BusTransaction(Kind.READ, addr, self._desc_beats, self.bytes_per_beat,
                             PayloadClass.DESCRIPTOR, self.port, self.name, now,
                             size=DESCRIPTOR_SIZE, watch=(self._next_beat,), tag=fetch)
        fetch.txn = txn
        self.live.append(fetch)
        self.fetch_log.append(FetchEvent(now, addr, fetch.chain, fetch.position,
                                         speculative, after_miss, trigger))
        self._last_issue = now
        self.arbiter.request(self.port, txn)
        self._check_bounds()
        if self._choose_possible_later():
            self._request_issue(now + 1)

    def _choose_possible_later(self) -> bool:
        if not self._credit():
            return False
        return (self._pending_arch is not None or bool(self.csr_queue and self._chain is None)
                or (self._chain is not None and self.config.prefetch_slots > 0
                    and self.speculative_outstanding < self.config.prefetch_slots))

    # ------------------------------------------------------------- arrivals
    def _on_event(self, msg) -> None:
        what = msg[0]
        if what == "issue":
            self.prefetch_issue()
        elif what == "beat":
            self._on_next_field(msg[1])
        elif what == "last":
            self.on_descriptor_arrival(msg[1])
        elif what == "dispatch":
            self._try_dispatch()
        elif what == "ack":
            self._on_writeback_ack(msg[1])
        # "first" beats carry nothing the frontend needs

    def _discard_from(self, index: int) -> None:
        for f in self.live[index:]:
            f.state = SlotState.DISCARDED
            self.discarded.append(f)
        del self.live[index:]

    def _end_chain(self) -> None:
        self._chain = None
        self._spec_base = None
        self._pending_arch = None
        self._pending_after_miss = False
        if self.csr_queue:
            self._request_issue(self.csr_queue[0].ready_cycle)

    def _on_next_field(self, txn: BusTransaction) -> None:
        fetch: DescriptorFetch = txn.tag
        if fetch.state is SlotState.DISCARDED:
            return
        now = self.sim.now
        idx = self.live.index(fetch)
        follower = self.live[idx + 1] if idx + 1 < len(self.live) else None
        fetch.next_known = now
        if txn.fault:
            self.faults.append((now, fetch.address, "bus fault on descriptor read"))
            self._discard_from(idx + 1)
            self._end_chain()
            return
        nxt = next_field(txn.data)
        if nxt == END_OF_CHAIN:
            self._discard_from(idx + 1)
            self._end_chain()
        elif nxt % DESCRIPTOR_SIZE:
            self.faults.append((now, fetch.address, f"misaligned next {nxt:#x}"))
            self._discard_from(idx + 1)
            self._end_chain()
        elif follower is not None and follower.predicted_address == nxt:
            follower.state = SlotState.COMMITTED
            self.hits += 1
        else:
            if follower is not None:
                self.misses += 1
            self._discard_from(idx + 1)
            self._pending_arch = (nxt, now)
            self._pending_after_miss = follower is not None
            self._position = fetch.position + 1
            self._spec_base = None
            self._request_issue(now)
        self._check_bounds()

    def on_descriptor_arrival(self, txn: BusTransaction) -> None:
        """Last beat of a descriptor read: decode it and queue the hand-off."""
        fetch: DescriptorFetch = txn.tag
        if fetch.state is SlotState.DISCARDED:
            return
        self.live.remove(fetch)
        now = self.sim.now
        if txn.fault:
            self._request_issue(now)
            return
        rec = TransferRecord(len(self.transfers), fetch.chain, fetch.position,
                             fetch.address, decode(txn.data))
        rec.fetch_issue_cycle = fetch.issue_cycle
        rec.next_known_cycle = fetch.next_known
        rec.fetched_cycle = now
        rec.speculative_hit = fetch.speculative
        rec.after_miss = fetch.after_miss
        self.transfers.append(rec)
        ready = now + 1 + self.config.decode_to_backend
        self.handoff.append((ready, rec))
        self.sim.schedule(ready, self.name, ("dispatch",))
        self._check_bounds()

    def _try_dispatch(self) -> None:
        now = self.sim.now
        freed = False
        while self.handoff and self.handoff[0][0] <= now and self.backend.can_accept():
            _, rec = self.handoff.popleft()
            self.backend.dispatch(rec)
            freed = True
        if freed:
            self._request_issue(now)

    # ------------------------------------------------------------ completion
    def on_backend_done(self, record: TransferRecord) -> None:
        if record.failed:
            record.completion_cycle = self.sim.now
            self.faults.append((self.sim.now, record.descriptor_address, "transfer failed"))
            return
        addr = record.descriptor_address
        txn = BusTransaction(Kind.WRITE, addr, beats_for(addr, len(MARKER), self.bytes_per_beat),
                             self.bytes_per_beat, PayloadClass.WRITEBACK, self.port, self.name,
                             self.sim.now, size=len(MARKER), data=MARKER, tag=record)
        self._writebacks += 1
        self.arbiter.request(self.port, txn)

    def _on_writeback_ack(self, txn: BusTransaction) -> None:
        rec: TransferRecord = txn.tag
        self._writebacks -= 1
        rec.completion_cycle = self.sim.now
        if rec.descriptor.irq:
            self.irq_count += 1
            self.on_irq(rec)


__all__ = ["Frontend", "FrontendConfig", "SlotState", "DescriptorFetch", "FetchEvent",
           "CSR_HEAD", "CSR_STATUS", "TransferState"]
