"""Fair round-robin arbiter between manager ports and the shared memory.

Read and write directions are arbitrated independently, like the split AXI
address channels.  A direction grants at most one burst per cycle and bursts
are atomic: after granting ``n`` beats the direction stays busy for ``n``
cycles, so back-to-back grants stream without idle beats.  A request must
have been enqueued in an earlier cycle to be eligible, which gives the fixed
one-cycle arbitration delay.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass

from .memory import BusTransaction, Kind, Memory
from .sim_core import Simulator


class ArbiterError(KeyError):
    pass


@dataclass(frozen=True)
class Grant:
    cycle: int
    port: str
    kind: Kind
    address: int
    beats: int
    payload_class: str
    uid: int


TRACE_COLUMNS = ("cycle", "port", "kind", "address", "beats", "payload_class")


class _Direction:
    def __init__(self, kind: Kind):
        self.kind = kind
        self.queues: dict[str, deque[BusTransaction]] = {}
        self.last_granted: int = -1
        self.free_at = 0
        self.wakeup: int | None = None

    def any_pending(self) -> bool:
        return any(self.queues.values())


class RoundRobinArbiter:
    def __init__(self, sim: Simulator, memory: Memory):
        self.sim = sim
        self.memory = memory
        self.ports: list[str] = []
        self._dirs = {Kind.READ: _Direction(Kind.READ), Kind.WRITE: _Direction(Kind.WRITE)}
        self.grants: list[Grant] = []
        self._uid = 0
        sim.register("arb", self._on_event)

    def add_port(self, name: str) -> str:
        if name in self.ports:
            raise ArbiterError(f"port {name!r} already registered")
        self.ports.append(name)
        for d in self._dirs.values():
            d.queues[name] = deque()
        return name

    def ensure_port(self, name: str) -> str:
        return name if name in self.ports else self.add_port(name)

    def request(self, port: str, txn: BusTransaction) -> None:
        if port not in self.ports:
            raise ArbiterError(f"unregistered port {port!r}")
        txn.issue_cycle = self.sim.now
        txn.uid = self._uid
        self._uid += 1
        d = self._dirs[txn.kind]
        d.queues[port].append(txn)
        self._wake(d, max(self.sim.now + 1, d.free_at))

    def pending(self, port: str | None = None) -> int:
        if port is None:
            return sum(len(q) for d in self._dirs.values() for q in d.queues.values())
        return sum(len(d.queues[port]) for d in self._dirs.values())

    def _wake(self, d: _Direction, at: int) -> None:
        if d.wakeup is not None and d.wakeup <= at:
            return
        d.wakeup = at
        self.sim.schedule(at, "arb", (d.kind, at))

    def _on_event(self, msg) -> None:
        kind, at = msg
        d = self._dirs[kind]
        if d.wakeup != at:
            return  # superseded by an earlier wakeup
        d.wakeup = None
        granted = self.arbitrate(kind)
        if d.any_pending():
            nxt = d.free_at if granted is not None else self.sim.now + 1
            self._wake(d, max(nxt, self.sim.now + 1))

    def arbitrate(self, kind: Kind) -> BusTransaction | None:
        """Grant at most one eligible burst in direction ``kind`` this cycle."""
        now = self.sim.now
        d = self._dirs[kind]
        if d.free_at > now:
            return None
        n = len(self.ports)
        for i in range(1, n + 1):
            idx = (d.last_granted + i) % n
            q = d.queues[self.ports[idx]]
            if q and q[0].issue_cycle < now:
                txn = q.popleft()
                d.last_granted = idx
                d.free_at = now + txn.beats
                self.grants.append(Grant(now, txn.origin_port, kind, txn.address,
                                         txn.beats, txn.payload_class.value, txn.uid))
                self.memory.service(txn, now)
                return txn
        return None

    def grant_trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for g in self.grants:
            w.writerow((g.cycle, g.port, g.kind.value, f"{g.address:#x}", g.beats,
                        g.payload_class))
        return buf.getvalue()
