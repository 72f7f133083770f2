"""32-byte transfer descriptors and descriptor chains.

Record layout (little-endian)::

    offset  0  u32 length
    offset  4  u32 config      bit 0: raise IRQ on completion, others reserved
    offset  8  u64 next        END_OF_CHAIN terminates the chain
    offset 16  u64 source
    offset 24  u64 destination
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

DESCRIPTOR_SIZE = 32
END_OF_CHAIN = (1 << 64) - 1
IRQ_ON_COMPLETION = 0x1
MAX_LENGTH = (1 << 32) - 1

_LAYOUT = struct.Struct("<IIQQQ")
assert _LAYOUT.size == DESCRIPTOR_SIZE

_CHAIN_MAGIC = b"DMACCHN1"


class DescriptorError(ValueError):
    pass


class ChainError(DescriptorError):
    pass


class Placement(Enum):
    SEQUENTIAL = "sequential"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Descriptor:
    length: int = 0
    config: int = 0
    next: int = END_OF_CHAIN
    source: int = 0
    destination: int = 0

    @property
    def irq(self) -> bool:
        return bool(self.config & IRQ_ON_COMPLETION)

    @property
    def is_last(self) -> bool:
        return self.next == END_OF_CHAIN


def encode(d: Descriptor) -> bytes:
    try:
        return _LAYOUT.pack(d.length, d.config, d.next, d.source, d.destination)
    except struct.error as exc:
        raise DescriptorError(f"field out of range in {d}: {exc}") from None


def decode(record: bytes) -> Descriptor:
    if len(record) != DESCRIPTOR_SIZE:
        raise DescriptorError(
            f"descriptor record must be {DESCRIPTOR_SIZE} bytes, got {len(record)}")
    return Descriptor(*_LAYOUT.unpack(bytes(record)))


def next_field(record: bytes) -> int:
    """Extract only the ``next`` pointer from a (possibly partial) record."""
    return int.from_bytes(record[8:16], "little")


@dataclass(frozen=True)
class DescriptorChain:
    head_address: int
    entries: tuple[tuple[int, Descriptor], ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def addresses(self) -> list[int]:
        return [a for a, _ in self.entries]

    @property
    def descriptors(self) -> list[Descriptor]:
        return [d for _, d in self.entries]

    def transfers(self) -> list[tuple[int, int, int, int]]:
        """The chain as ``(source, destination, length, config)`` tuples."""
        return [(d.source, d.destination, d.length, d.config) for d in self.descriptors]

    def load(self, write: Callable[[int, bytes], None]) -> None:
        """Write every record through ``write(address, data)``."""
        for addr, d in self.entries:
            write(addr, encode(d))


def build_chain(transfers: Sequence[tuple[int, int, int, int]], base_address: int,
                placement: Placement = Placement.SEQUENTIAL,
                addresses: Sequence[int] | None = None) -> DescriptorChain:
    """Link ``(source, destination, length, config)`` transfers into a chain.

    With ``Placement.SEQUENTIAL`` entry ``i`` sits at ``base_address + 32*i``.
    With ``Placement.EXPLICIT`` the caller supplies one address per transfer
    and ``base_address`` is ignored in favour of ``addresses[0]``.
    """
    if not transfers:
        raise ChainError("a chain needs at least one transfer")
    if placement is Placement.SEQUENTIAL:
        if base_address % DESCRIPTOR_SIZE:
            raise ChainError(f"base address {base_address:#x} is not 32-byte aligned")
        addrs = [base_address + DESCRIPTOR_SIZE * i for i in range(len(transfers))]
        if addrs[-1] + DESCRIPTOR_SIZE > END_OF_CHAIN:
            raise ChainError("sequential chain runs past the end of the address space")
    else:
        if addresses is None or len(addresses) != len(transfers):
            raise ChainError("explicit placement needs one address per transfer")
        addrs = list(addresses)
        _check_addresses(addrs)
    entries = []
    for i, (src, dst, length, cfg) in enumerate(transfers):
        nxt = addrs[i + 1] if i + 1 < len(addrs) else END_OF_CHAIN
        entries.append((addrs[i], Descriptor(length, cfg, nxt, src, dst)))
    return DescriptorChain(addrs[0], tuple(entries))


def _check_addresses(addrs: Iterable[int]) -> None:
    seen = set()
    for a in addrs:
        if a % DESCRIPTOR_SIZE:
            raise ChainError(f"descriptor address {a:#x} is not 32-byte aligned")
        if a == END_OF_CHAIN or a < 0:
            raise ChainError(f"invalid descriptor address {a:#x}")
        if a in seen:
            raise ChainError(f"descriptor address {a:#x} used twice")
        seen.add(a)


def validate_chain(read: Callable[[int, int], bytes], head: int,
                   max_len: int = 1 << 20) -> DescriptorChain:
    """Walk a chain in memory starting at ``head``.

    ``read(address, length)`` must raise on unreadable addresses; the error
    is re-raised as :class:`ChainError`.  A head of ``END_OF_CHAIN`` yields
    an empty chain.
    """
    entries: list[tuple[int, Descriptor]] = []
    seen: set[int] = set()
    addr = head
    while addr != END_OF_CHAIN:
        if addr % DESCRIPTOR_SIZE:
            raise ChainError(f"descriptor address {addr:#x} is not 32-byte aligned")
        if addr in seen:
            raise ChainError(f"cycle detected at descriptor {addr:#x}")
        if len(entries) >= max_len:
            raise ChainError(f"chain longer than {max_len} descriptors")
        try:
            d = decode(read(addr, DESCRIPTOR_SIZE))
        except (IndexError, ValueError) as exc:
            if isinstance(exc, DescriptorError):
                raise
            raise ChainError(f"cannot read descriptor at {addr:#x}: {exc}") from exc
        seen.add(addr)
        entries.append((addr, d))
        addr = d.next
    return DescriptorChain(head, tuple(entries))


def dump_chain(chain: DescriptorChain) -> bytes:
    """Flat binary form: magic, u32 count, count u64 addresses, count records."""
    out = bytearray(_CHAIN_MAGIC)
    out += struct.pack("<I", len(chain))
    for addr in chain.addresses:
        out += struct.pack("<Q", addr)
    for d in chain.descriptors:
        out += encode(d)
    return bytes(out)


def load_chain(blob: bytes) -> DescriptorChain:
    if blob[:8] != _CHAIN_MAGIC:
        raise ChainError("not a descriptor chain file")
    (count,) = struct.unpack_from("<I", blob, 8)
    off = 12
    addrs = list(struct.unpack_from(f"<{count}Q", blob, off))
    off += 8 * count
    if len(blob) != off + DESCRIPTOR_SIZE * count:
        raise ChainError("truncated descriptor chain file")
    descs = [decode(blob[off + DESCRIPTOR_SIZE * i: off + DESCRIPTOR_SIZE * (i + 1)])
             for i in range(count)]
    if not addrs:
        return DescriptorChain(END_OF_CHAIN, ())
    return DescriptorChain(addrs[0], tuple(zip(addrs, descs)))
