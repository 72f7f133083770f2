"""In-process model of the operating-system driver's memcpy flow.

Clients prepare memcpy handles, commit an ordered batch of them as one chain
and issue it.  At most ``max_chains`` chains are launched on the controller at
a time; the rest wait in a deferred queue and are launched from the IRQ
handler as earlier chains retire.

Only the final descriptor of a chain may request an interrupt.  Completion of
everything else is discovered by scanning completion markers, either inside
the IRQ handler or from :meth:`DmaDriver.poll` for chains launched without an
interrupt.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

from .descriptor import (DESCRIPTOR_SIZE, END_OF_CHAIN, IRQ_ON_COMPLETION, MAX_LENGTH,
                         Descriptor, encode)
from .frontend import MARKER
from .testbench import Testbench

# largest piece of a split memcpy: fits a u32 length and stays bus aligned
SPLIT_LENGTH = (1 << 32) - 8


class DriverError(RuntimeError):
    pass


class ArenaExhausted(DriverError):
    pass


class HandleState(IntEnum):
    PREPARED = 1
    COMMITTED = 2
    SUBMITTED = 3
    COMPLETED = 4


@dataclass(eq=False)
class TransferHandle:
    ident: int
    source: int
    destination: int
    length: int
    want_irq: bool
    callback: Optional[Callable[["TransferHandle"], None]] = None
    descriptors: list[int] = field(default_factory=list)
    pieces: list[Descriptor] = field(default_factory=list)
    state: HandleState = HandleState.PREPARED
    completed_cycle: int | None = None

    def advance(self, state: HandleState) -> None:
        if state <= self.state:
            raise DriverError(f"handle {self.ident}: {self.state.name} -> {state.name}")
        self.state = state

    @property
    def tail(self) -> int:
        return self.descriptors[-1]


@dataclass(eq=False)
class _Chain:
    handles: list[TransferHandle]
    head: int
    irq: bool
    done: int = 0       # handles already completed

    @property
    def retired(self) -> bool:
        return self.done == len(self.handles)


class DescriptorArena:
    """Bump allocator over a region of simulated memory.

    Space is reclaimed all at once when the last live allocation is freed,
    which keeps descriptor placement sequential and deterministic.
    """

    def __init__(self, base: int, size: int):
        if base % DESCRIPTOR_SIZE or size < DESCRIPTOR_SIZE:
            raise ValueError("arena must be 32-byte aligned and hold one descriptor")
        self.base = base
        self.size = size
        self.cursor = base
        self.live = 0

    def alloc(self, count: int) -> list[int]:
        need = count * DESCRIPTOR_SIZE
        if self.cursor + need > self.base + self.size:
            raise ArenaExhausted(f"need {need} bytes, {self.base + self.size - self.cursor} left")
        addrs = [self.cursor + DESCRIPTOR_SIZE * i for i in range(count)]
        self.cursor += need
        self.live += count
        return addrs

    def free(self, count: int) -> None:
        self.live -= count
        if self.live < 0:
            raise DriverError("arena freed more descriptors than allocated")
        if self.live == 0:
            self.cursor = self.base


def split_length(length: int, chunk: int = SPLIT_LENGTH) -> list[int]:
    """Descriptor lengths for one memcpy; a zero-length copy keeps one descriptor."""
    if length < 0:
        raise ValueError("negative length")
    if length == 0:
        return [0]
    pieces = []
    while length > 0:
        piece = min(length, chunk)
        pieces.append(piece)
        length -= piece
    assert all(p <= MAX_LENGTH for p in pieces)
    return pieces


class DmaDriver:
    def __init__(self, tb: Testbench, arena_base: int, arena_size: int, max_chains: int = 4):
        if max_chains < 1:
            raise ValueError("max_chains must be >= 1")
        self.tb = tb
        self.arena = DescriptorArena(arena_base, arena_size)
        self.max_chains = max_chains
        self.committed: deque[_Chain] = deque()
        self.deferred: deque[_Chain] = deque()
        self.active: list[_Chain] = []
        self.peak_active = 0
        self.csr_writes = 0
        self.irqs_handled = 0
        self.spurious_irqs = 0
        self._ids = 0
        tb.irq_listeners.append(lambda rec: self.irq_handler())

    @property
    def active_chains(self) -> int:
        return len(self.active)

    # -------------------------------------------------------------- client API
    def prepare_memcpy(self, source: int, destination: int, length: int,
                       want_irq: bool = False,
                       callback: Callable[[TransferHandle], None] | None = None) -> TransferHandle:
        lengths = split_length(length)
        addrs = self.arena.alloc(len(lengths))
        h = TransferHandle(self._ids, source, destination, length, want_irq, callback, addrs)
        self._ids += 1
        off = 0
        for i, n in enumerate(lengths):
            nxt = addrs[i + 1] if i + 1 < len(addrs) else END_OF_CHAIN
            h.pieces.append(Descriptor(n, 0, nxt, source + off, destination + off))
            off += n
        self._write_all(h)
        return h

    def commit(self, handles: list[TransferHandle]) -> None:
        """Splice ``handles`` in order into one chain, ready for :meth:`issue`."""
        if not handles:
            return
        for h in handles:
            if h.state is not HandleState.PREPARED:
                raise DriverError(f"handle {h.ident} is {h.state.name}, expected PREPARED")
        for a, b in zip(handles, handles[1:]):
            last = a.pieces[-1]
            a.pieces[-1] = Descriptor(last.length, last.config, b.descriptors[0],
                                      last.source, last.destination)
        # the chain interrupts once, at its end, if any member asked for it
        irq = any(h.want_irq for h in handles)
        if irq:
            tail = handles[-1].pieces[-1]
            handles[-1].pieces[-1] = Descriptor(tail.length, tail.config | IRQ_ON_COMPLETION,
                                                tail.next, tail.source, tail.destination)
        for h in handles:
            self._write_all(h)
            h.advance(HandleState.COMMITTED)
        self.committed.append(_Chain(list(handles), handles[0].descriptors[0], irq))

    def issue(self) -> None:
        """Launch committed chains while below ``max_chains``; defer the rest."""
        while self.committed:
            chain = self.committed.popleft()
            for h in chain.handles:
                h.advance(HandleState.SUBMITTED)
            self.deferred.append(chain)
        self._launch_deferred()

    # ------------------------------------------------------------ completion
    def irq_handler(self) -> None:
        """Level-triggered: drain every completion visible in memory."""
        self.irqs_handled += 1
        if not self._scan():
            self.spurious_irqs += 1
        self._launch_deferred()

    def poll(self) -> bool:
        """Marker scan without an interrupt; returns True if anything completed."""
        found = self._scan()
        self._launch_deferred()
        return found

    def run(self, max_cycles: int = 50_000_000) -> int:
        """Simulate until every issued chain has completed, polling when idle."""
        while True:
            self.tb.run(max_cycles)
            if not self.active and not self.deferred:
                return self.tb.sim.now
            if not self.poll():
                raise DriverError("controller idle but chains remain incomplete")

    # --------------------------------------------------------------- helpers
    def _write_all(self, h: TransferHandle) -> None:
        for addr, d in zip(h.descriptors, h.pieces):
            self.tb.memory.backdoor_write(addr, encode(d))

    def _complete(self, h: TransferHandle) -> bool:
        return self.tb.memory.backdoor_read(h.tail, len(MARKER)) == MARKER

    def _scan(self) -> bool:
        found = False
        for chain in list(self.active):
            # descriptors retire in chain order, so stop at the first unfinished handle
            while not chain.retired and self._complete(chain.handles[chain.done]):
                h = chain.handles[chain.done]
                chain.done += 1
                h.advance(HandleState.COMPLETED)
                h.completed_cycle = self.tb.sim.now
                found = True
                if h.callback is not None:
                    h.callback(h)
            if chain.retired and chain in self.active:
                self.active.remove(chain)
                self.arena.free(sum(len(h.descriptors) for h in chain.handles))
        return found

    def _launch_deferred(self) -> None:
        while self.deferred and len(self.active) < self.max_chains:
            chain = self.deferred.popleft()
            self.active.append(chain)
            self.peak_active = max(self.peak_active, len(self.active))
            self.csr_writes += 1
            self.tb.launch(chain.head, at=self.tb.sim.now)
