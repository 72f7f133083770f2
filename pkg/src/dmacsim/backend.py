"""Payload transfer engine.

The backend accepts linear transfers in dispatch order, splits each into
bursts, streams every read burst into a matching write burst and reports
completions back in dispatch order once the last write is acknowledged.

A transfer occupies one of ``queue_depth`` slots from dispatch until all of
its read data has returned.  Independently, at most ``max_outstanding_reads``
read bursts may be requested but not yet fully returned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .descriptor import Descriptor
from .interconnect import RoundRobinArbiter
from .memory import BusTransaction, Kind, PayloadClass, beats_for
from .sim_core import Simulator


class TransferState(Enum):
    FETCHED = 1
    DISPATCHED = 2
    DONE = 3


@dataclass(frozen=True)
class BackendConfig:
    data_width: int = 64
    max_burst_beats: int = 256
    read_to_write_latency: int = 1
    queue_depth: int = 4
    max_outstanding_reads: int = 16

    def __post_init__(self):
        if self.read_to_write_latency < 1:
            raise ValueError("read_to_write_latency must be >= 1")
        if not 2 <= self.max_burst_beats <= 256:
            raise ValueError("max_burst_beats must lie in [2, 256]")
        if self.queue_depth < 1 or self.max_outstanding_reads < 1:
            raise ValueError("queue_depth and max_outstanding_reads must be >= 1")

    @property
    def bytes_per_beat(self) -> int:
        return self.data_width // 8


@dataclass(eq=False)
class TransferRecord:
    index: int
    chain: int
    position: int
    descriptor_address: int
    descriptor: Descriptor
    state: TransferState = TransferState.FETCHED
    # probe timestamps; None until the event happens
    fetch_issue_cycle: int | None = None
    next_known_cycle: int | None = None
    fetched_cycle: int | None = None
    dispatch_cycle: int | None = None
    first_read_beat: int | None = None
    first_write_beat: int | None = None
    done_cycle: int | None = None
    completion_cycle: int | None = None
    speculative_hit: bool = False
    after_miss: bool = False
    failed: bool = False

    def advance(self, state: TransferState) -> None:
        if state.value <= self.state.value:
            raise RuntimeError(f"transfer {self.index}: {self.state} -> {state} is not forward")
        self.state = state

    def __repr__(self) -> str:
        return f"Transfer#{self.index}({self.descriptor_address:#x} {self.state.name})"


def burst_plan(source: int, destination: int, length: int, bytes_per_beat: int,
               max_burst_beats: int) -> list[tuple[int, int, int]]:
    """Split a transfer into ``(source, destination, size)`` chunks.

    Each chunk needs at most ``max_burst_beats`` beats on both the read and
    the write side, whatever the alignment of either address.
    """
    if length == 0:
        return []
    aligned = source % bytes_per_beat == 0 and destination % bytes_per_beat == 0
    chunk = max_burst_beats * bytes_per_beat if aligned else (max_burst_beats - 1) * bytes_per_beat
    plan = []
    off = 0
    while off < length:
        size = min(chunk, length - off)
        plan.append((source + off, destination + off, size))
        off += size
    return plan


@dataclass(eq=False)
class _Job:
    record: TransferRecord
    chunks: list[tuple[int, int, int]]
    next_chunk: int = 0
    reads_done: int = 0
    writes_done: int = 0
    slot_held: bool = True

    @property
    def read_complete(self) -> bool:
        return self.reads_done == len(self.chunks)

    @property
    def complete(self) -> bool:
        return self.writes_done == len(self.chunks)


class Backend:
    def __init__(self, sim: Simulator, arbiter: RoundRobinArbiter, config: BackendConfig,
                 name: str = "be"):
        self.sim = sim
        self.arbiter = arbiter
        self.config = config
        self.name = name
        self.port = arbiter.ensure_port(name)
        self._jobs: deque[_Job] = deque()
        self._slots_used = 0
        self._outstanding_reads = 0
        self.on_done: Callable[[TransferRecord], None] = lambda rec: None
        self.on_slot_free: Callable[[], None] = lambda: None
        self.read_bursts: list[BusTransaction] = []
        self.write_bursts: list[BusTransaction] = []
        self.max_outstanding_seen = 0
        sim.register(name, self._on_event)

    def can_accept(self) -> bool:
        return self._slots_used < self.config.queue_depth

    @property
    def busy(self) -> bool:
        return bool(self._jobs)

    def dispatch(self, record: TransferRecord) -> None:
        if not self.can_accept():
            raise RuntimeError("backend queue full; caller must apply backpressure")
        record.advance(TransferState.DISPATCHED)
        record.dispatch_cycle = self.sim.now
        d = record.descriptor
        chunks = burst_plan(d.source, d.destination, d.length,
                            self.config.bytes_per_beat, self.config.max_burst_beats)
        job = _Job(record, chunks)
        self._jobs.append(job)
        self._slots_used += 1
        if not chunks:
            self._release_slot(job, notify=False)
            self._retire()
        self._issue_reads()

    def _issue_reads(self) -> None:
        bpb = self.config.bytes_per_beat
        for job in self._jobs:
            while job.next_chunk < len(job.chunks):
                if self._outstanding_reads >= self.config.max_outstanding_reads:
                    return
                src, _, size = job.chunks[job.next_chunk]
                txn = BusTransaction(Kind.READ, src, beats_for(src, size, bpb), bpb,
                                     PayloadClass.PAYLOAD, self.port, self.name,
                                     self.sim.now, size=size, tag=(job, job.next_chunk))
                job.next_chunk += 1
                self._outstanding_reads += 1
                self.max_outstanding_seen = max(self.max_outstanding_seen,
                                                self._outstanding_reads)
                self.read_bursts.append(txn)
                self.arbiter.request(self.port, txn)

    def _on_event(self, msg) -> None:
        what = msg[0]
        if what == "first":
            txn = msg[1]
            job, idx = txn.tag
            if idx == 0:
                job.record.first_read_beat = self.sim.now
            delay = self.config.read_to_write_latency - 1
            if delay:
                self.sim.after(delay, self.name, ("wreq", txn))
            else:
                self._request_write(txn)
        elif what == "wreq":
            self._request_write(msg[1])
        elif what == "last":
            txn = msg[1]
            job, _ = txn.tag
            if txn.fault:
                job.record.failed = True
            job.reads_done += 1
            self._outstanding_reads -= 1
            if job.read_complete:
                self._release_slot(job)
            self._issue_reads()
        elif what == "ack":
            txn = msg[1]
            job, idx = txn.tag
            if txn.fault:
                job.record.failed = True
            if idx == 0:
                job.record.first_write_beat = txn.grant_cycle
            job.writes_done += 1
            self._retire()

    def _request_write(self, rtxn: BusTransaction) -> None:
        job, idx = rtxn.tag
        _, dst, size = job.chunks[idx]
        bpb = self.config.bytes_per_beat
        wtxn = BusTransaction(Kind.WRITE, dst, beats_for(dst, size, bpb), bpb,
                              PayloadClass.PAYLOAD, self.port, self.name, self.sim.now,
                              size=size, data=rtxn.data, tag=(job, idx))
        self.write_bursts.append(wtxn)
        self.arbiter.request(self.port, wtxn)

    def _release_slot(self, job: _Job, notify: bool = True) -> None:
        if job.slot_held:
            job.slot_held = False
            self._slots_used -= 1
            if notify:
                self.on_slot_free()

    def _retire(self) -> None:
        # completions are reported strictly in dispatch order
        while self._jobs and self._jobs[0].complete:
            job = self._jobs.popleft()
            rec = job.record
            rec.done_cycle = self.sim.now
            rec.advance(TransferState.DONE)
            self.on_done(rec)
