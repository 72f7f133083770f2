"""Latency-configurable, byte-addressable memory with burst service.

Timing (``L`` = one-way latency):

* read granted at ``g``: beat ``k`` is returned at ``g + 2L + k``
* write granted at ``g``: beat ``k`` is absorbed at ``g + k``; bytes become
  visible at the last beat and the acknowledgment arrives ``2L`` after it

The memory accepts a new request every cycle; bandwidth sharing is decided by
the arbiter in :mod:`dmacsim.interconnect`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from .sim_core import Simulator

VALID_DATA_WIDTHS = (16, 32, 64, 128, 256, 512)
_IMAGE_MAGIC = b"DMACMEM1"


class OutOfBounds(IndexError):
    """Out-of-bounds memory access."""


class Kind(Enum):
    READ = "read"
    WRITE = "write"


class PayloadClass(Enum):
    DESCRIPTOR = "descriptor"
    PAYLOAD = "payload"
    WRITEBACK = "writeback"
    WASTED = "wasted"


@dataclass(frozen=True)
class MemoryConfig:
    one_way_latency: int = 1
    data_width: int = 64
    capacity: int = 16 << 20

    def __post_init__(self):
        if self.data_width not in VALID_DATA_WIDTHS:
            raise ValueError(f"data_width must be one of {VALID_DATA_WIDTHS}")
        if self.one_way_latency < 1:
            raise ValueError("one_way_latency must be >= 1")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")

    @property
    def bytes_per_beat(self) -> int:
        return self.data_width // 8


@dataclass(eq=False)
class BusTransaction:
    """One read or write burst.

    ``owner`` names the simulator handler that receives ``("first", txn)``,
    ``("last", txn)`` for reads, ``("ack", txn)`` for writes and
    ``("beat", txn, k)`` for every beat index listed in ``watch``.
    """

    kind: Kind
    address: int
    beats: int
    bytes_per_beat: int
    payload_class: PayloadClass
    origin_port: str
    owner: str
    issue_cycle: int
    size: int = 0                       # useful bytes; 0 means beats * bytes_per_beat
    data: bytes | None = None           # write data, or read data once granted
    watch: tuple[int, ...] = ()
    tag: object = None
    grant_cycle: int | None = None
    fault: bool = False
    uid: int = -1                       # assigned by the arbiter on request

    def __post_init__(self):
        if self.beats < 1:
            raise ValueError("a bus transaction needs at least one beat")
        if self.size == 0:
            self.size = self.beats * self.bytes_per_beat

    def __repr__(self) -> str:
        return (f"Txn#{self.uid}({self.kind.value} {self.address:#x} x{self.beats} "
                f"{self.payload_class.value} {self.origin_port})")

    def beat_cycles(self, one_way_latency: int) -> tuple[int, int]:
        """First and last data-beat cycle once granted."""
        assert self.grant_cycle is not None
        if self.kind is Kind.READ:
            first = self.grant_cycle + 2 * one_way_latency
        else:
            first = self.grant_cycle
        return first, first + self.beats - 1


def beats_for(address: int, length: int, bytes_per_beat: int) -> int:
    """Bus beats touched by ``length`` bytes starting at ``address``."""
    if length <= 0:
        return 0
    offset = address % bytes_per_beat
    return -(-(offset + length) // bytes_per_beat)


class Memory:
    def __init__(self, config: MemoryConfig, sim: Simulator | None = None):
        self.config = config
        self.sim = sim
        self._data = bytearray(config.capacity)
        self.faults: list[BusTransaction] = []
        if sim is not None:
            sim.register("mem", self._on_event)

    @property
    def capacity(self) -> int:
        return self.config.capacity

    def in_bounds(self, address: int, length: int) -> bool:
        return 0 <= address and address + length <= self.config.capacity

    def _check(self, address: int, length: int) -> None:
        if not self.in_bounds(address, length):
            raise OutOfBounds(
                f"access [{address:#x}, {address + length:#x}) outside capacity "
                f"{self.config.capacity:#x}")

    def backdoor_write(self, address: int, data: bytes) -> None:
        self._check(address, len(data))
        self._data[address:address + len(data)] = data

    def backdoor_read(self, address: int, length: int) -> bytes:
        self._check(address, length)
        return bytes(self._data[address:address + length])

    def service(self, txn: BusTransaction, grant_cycle: int) -> None:
        """Schedule the responses of a granted transaction."""
        sim = self.sim
        assert sim is not None, "service() needs a simulator"
        L = self.config.one_way_latency
        txn.grant_cycle = grant_cycle
        span = txn.beats * txn.bytes_per_beat
        if not self.in_bounds(txn.address, min(txn.size, span)):
            txn.fault = True
            self.faults.append(txn)
        first, last = txn.beat_cycles(L)
        if txn.kind is Kind.READ:
            if txn.fault:
                txn.data = bytes(txn.size)
            else:
                txn.data = bytes(self._data[txn.address:txn.address + txn.size])
            for k in txn.watch:
                sim.schedule(first + k, txn.owner, ("beat", txn, k))
            sim.schedule(first, txn.owner, ("first", txn))
            sim.schedule(last, txn.owner, ("last", txn))
        else:
            if not txn.fault:
                sim.schedule(last, "mem", ("commit", txn))
            sim.schedule(last + 2 * L, txn.owner, ("ack", txn))

    def _on_event(self, msg) -> None:
        _, txn = msg
        assert txn.data is not None
        self._data[txn.address:txn.address + len(txn.data)] = txn.data

    # flat image files: magic, u64 base, u64 length, raw bytes
    def dump_image(self, base: int, length: int) -> bytes:
        return _IMAGE_MAGIC + struct.pack("<QQ", base, length) + self.backdoor_read(base, length)

    def load_image(self, blob: bytes) -> tuple[int, int]:
        if blob[:8] != _IMAGE_MAGIC:
            raise ValueError("not a memory image")
        base, length = struct.unpack_from("<QQ", blob, 8)
        body = blob[24:]
        if len(body) != length:
            raise ValueError("truncated memory image")
        self.backdoor_write(base, body)
        return base, length
