"""Simulated network substrate: nodes, classical FIFOs and entanglement services.

The fabric is the only gateway ranks use to touch the engine.  It enforces
physical locality (a rank may only operate on qubits it owns), matches EPR
creations to receptions, delivers GHZ shares, and carries classical messages
over lossless per-pair FIFO channels.  Every operation is committed and
traced under one lock, so trace order equals engine commit order.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .engine import DEFAULT_QUBIT_CAP, QuantumEngine, QubitHandle
from .errors import (
    CapacityExceeded,
    ConfigError,
    DeadlockTimeout,
    DuplicateInit,
    DuplicateOwner,
    LocalityViolation,
    NotConnected,
    SizeMismatch,
    TagMismatch,
    UnknownNode,
)
from .scheduling import ConcurrentScheduler
from .trace import TraceLog


@dataclass(frozen=True)
class TopologyConfig:
    """Run-wide network description.

    ``connectivity`` is ``"mesh"`` or a tuple of undirected ``(a, b)`` pairs.
    """

    size: int
    connectivity: object = "mesh"
    qubit_cap: int = DEFAULT_QUBIT_CAP
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError(f"size must be >= 1, got {self.size}")
        if self.qubit_cap < 1:
            raise ConfigError(f"qubit_cap must be >= 1, got {self.qubit_cap}")
        if self.connectivity != "mesh":
            pairs = tuple(tuple(p) for p in self.connectivity)
            for a, b in pairs:
                if a == b or not (0 <= a < self.size and 0 <= b < self.size):
                    raise ConfigError(f"bad link ({a},{b}) for size {self.size}")
            object.__setattr__(self, "connectivity", pairs)

    def connected(self, a: int, b: int) -> bool:
        if a == b:
            return False
        if self.connectivity == "mesh":
            return True
        return (a, b) in self.connectivity or (b, a) in self.connectivity

    def neighbours(self, rank: int) -> list[int]:
        return [r for r in range(self.size) if self.connected(rank, r)]

    @classmethod
    def from_text(cls, text: str, defaults: dict | None = None, **overrides) -> "TopologyConfig":
        """Parse ``key=value`` lines; ``#`` starts a comment.

        Recognised keys: ``size``, ``connectivity`` (``mesh`` or
        ``pairs:(a,b),(c,d)``), ``qubit_cap``, ``seed``.  ``defaults`` fill
        keys the text leaves out; non-None keyword overrides replace values.
        """
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if key in ("size", "qubit_cap", "seed"):
                try:
                    values[key] = int(value)
                except ValueError:
                    raise ConfigError(f"line {lineno}: {key} must be an integer") from None
            elif key == "connectivity":
                values[key] = _parse_connectivity(value, lineno)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        for k, v in (defaults or {}).items():
            values.setdefault(k, v)
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "size" not in values:
            raise ConfigError("size is required")
        return cls(**values)

    @classmethod
    def load(cls, path, defaults: dict | None = None, **overrides) -> "TopologyConfig":
        return cls.from_text(Path(path).read_text(), defaults, **overrides)


_PAIR = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def _parse_connectivity(value: str, lineno: int):
    if value == "mesh":
        return "mesh"
    if not value.startswith("pairs:"):
        raise ConfigError(f"line {lineno}: connectivity must be 'mesh' or 'pairs:...'")
    body = value[len("pairs:"):].strip()
    pairs = [(int(a), int(b)) for a, b in _PAIR.findall(body)]
    if _PAIR.sub("", body).replace(",", "").strip() or not pairs:
        raise ConfigError(f"line {lineno}: malformed pair list {body!r}")
    return tuple(pairs)


@dataclass(frozen=True)
class ClassicalMessage:
    tag: str
    payload: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(int(v) for v in self.payload))


@dataclass(eq=False)
class EprSocket:
    """Shared endpoint for one undirected node pair.

    Pending halves are queued per receiving endpoint so both directions can
    be used independently; each queue is FIFO.
    """

    a: int
    b: int
    pending: dict = field(default_factory=dict)
    created: int = 0
    received: int = 0

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("an EPR socket needs two distinct endpoints")
        self.pending = {self.a: deque(), self.b: deque()}

    def peer_of(self, rank: int) -> int:
        if rank == self.a:
            return self.b
        if rank == self.b:
            return self.a
        raise NotConnected(f"rank {rank} is not an endpoint of socket ({self.a},{self.b})")

    @property
    def in_flight(self) -> int:
        return sum(len(q) for q in self.pending.values())


class Network:
    """The fabric shared by all ranks of one run."""

    def __init__(self, config: TopologyConfig, scheduler=None, trace: TraceLog | None = None):
        self.config = config
        self.size = config.size
        self.engine = QuantumEngine(seed=config.seed, qubit_cap=config.qubit_cap)
        self.scheduler = scheduler if scheduler is not None else ConcurrentScheduler()
        self.cond = self.scheduler.cond
        self.trace = trace if trace is not None else TraceLog()
        self._sockets: dict[tuple[int, int], EprSocket] = {}
        self._channels: dict[tuple[int, int], deque] = {}
        self._ghz_pending: dict[int, deque] = {r: deque() for r in range(self.size)}
        self._barrier_calls = [0] * self.size
        self._registered: dict[int, int] = {}
        self._next_pair = 0

    # -- bookkeeping -------------------------------------------------------

    def _check_node(self, rank: int) -> None:
        if not isinstance(rank, int) or not 0 <= rank < self.size:
            raise UnknownNode(f"no node with rank {rank!r} (size {self.size})")

    def register(self, rank: int, size: int) -> None:
        """Init handshake: every communicator must agree on size and init once."""
        with self.cond:
            if size != self.size:
                raise SizeMismatch(f"rank {rank} initialised with size {size}, fabric has {self.size}")
            self._check_node(rank)
            if rank in self._registered:
                raise DuplicateInit(f"rank {rank} already has a communicator")
            self._registered[rank] = size

    def epr_socket(self, a: int, b: int) -> EprSocket:
        self._check_node(a)
        self._check_node(b)
        if not self.config.connected(a, b):
            raise NotConnected(f"no link between ranks {a} and {b}")
        key = (min(a, b), max(a, b))
        with self.cond:
            sock = self._sockets.get(key)
            if sock is None:
                sock = self._sockets[key] = EprSocket(*key)
            return sock

    @property
    def sockets(self) -> dict:
        return dict(self._sockets)

    def pending_messages(self, frm: int, to: int) -> list[ClassicalMessage]:
        return list(self._channels.get((frm, to), ()))

    # -- local quantum operations -----------------------------------------

    def _check_local(self, rank: int, handles: Sequence[QubitHandle]) -> None:
        for h in handles:
            owner = self.engine._owners.get(h.id, h.owner)
            if owner != rank:
                raise LocalityViolation(f"rank {rank} cannot operate on qubit {h.id} owned by rank {owner}")

    def alloc(self, rank: int) -> QubitHandle:
        self._check_node(rank)
        with self.cond:
            h = self.engine.alloc_qubit(rank)
            self.trace.emit(rank, "alloc", qubit=h.id)
            return h

    def apply_gate(self, rank: int, gate: str, handles: Sequence[QubitHandle]) -> None:
        handles = list(handles)
        with self.cond:
            self._check_local(rank, handles)
            self.engine.apply_gate(gate, handles)
            self.trace.emit(rank, "gate", gate=gate.upper(), qubits=",".join(str(h.id) for h in handles))

    def measure(self, rank: int, q: QubitHandle) -> int:
        with self.cond:
            self._check_local(rank, [q])
            bit = self.engine.measure(q)
            self.trace.emit(rank, "measure", qubit=q.id, outcome=bit)
            return bit

    def free(self, rank: int, q: QubitHandle) -> None:
        with self.cond:
            self._check_local(rank, [q])
            self.engine.free_qubit(q)
            self.trace.emit(rank, "free", qubit=q.id)
            self.scheduler.notify()

    def flush(self, rank: int) -> None:
        # Commits are eager: the fence marks the trace and is a scheduling step.
        with self.cond:
            self.trace.emit(rank, "flush")
            self.scheduler.yield_point()

    def snapshot(self, handles: Sequence[QubitHandle]):
        with self.cond:
            return self.engine.snapshot_amplitudes(handles)

    # -- entanglement services --------------------------------------------

    def _await_capacity(self, n: int, what: str) -> None:
        """Park until ``n`` more qubits fit; CapacityExceeded if nobody can free any."""
        eng = self.engine
        if n > eng.qubit_cap:
            raise CapacityExceeded(f"{what}: needs {n} qubits, cap is {eng.qubit_cap}")
        try:
            self.scheduler.wait_until(lambda: eng.num_qubits + n <= eng.qubit_cap, what)
        except DeadlockTimeout:
            raise CapacityExceeded(
                f"{what}: {eng.num_qubits} of {eng.qubit_cap} qubits live and none being freed"
            ) from None

    def epr_create(self, socket: EprSocket, initiator: int) -> QubitHandle:
        peer = socket.peer_of(initiator)
        if not self.config.connected(initiator, peer):
            raise NotConnected(f"no link between ranks {initiator} and {peer}")
        with self.cond:
            self._await_capacity(2, f"room for an EPR pair to rank {peer}")
            mine, theirs = self.engine.create_bell(initiator, peer)
            pair = self._next_pair
            self._next_pair += 1
            socket.pending[peer].append((pair, theirs))
            socket.created += 1
            self.trace.emit(initiator, "epr", op="create", peer=peer, pair=pair, qubit=mine.id)
            self.scheduler.notify()
            return mine

    def epr_recv(self, socket: EprSocket, receiver: int) -> QubitHandle:
        peer = socket.peer_of(receiver)
        queue = socket.pending[receiver]
        with self.cond:
            self.scheduler.wait_until(lambda: bool(queue), f"EPR half from rank {peer}")
            pair, h = queue.popleft()
            socket.received += 1
            self.trace.emit(receiver, "epr", op="recv", peer=peer, pair=pair, qubit=h.id)
            return h

    def ghz_create(self, owners: Sequence[int], initiator: int) -> list[QubitHandle]:
        """Prepare one GHZ state and queue one share for each owner.

        Owners collect their share with :meth:`ghz_recv`; the returned list
        is for bookkeeping only.
        """
        owners = list(owners)
        for r in owners + [initiator]:
            self._check_node(r)
        if len(set(owners)) != len(owners):
            raise DuplicateOwner(f"GHZ owners must be distinct, got {owners}")
        for r in owners:
            if r != initiator and not self.config.connected(initiator, r):
                raise NotConnected(f"no link between ranks {initiator} and {r}")
        with self.cond:
            self._await_capacity(len(owners), f"room for a {len(owners)}-party GHZ state")
            shares = self.engine.create_ghz(owners)
            for r, h in zip(owners, shares):
                self._ghz_pending[r].append(h)
            self.trace.emit(initiator, "ghz", op="create", owners=",".join(map(str, owners)),
                            qubits=",".join(str(h.id) for h in shares))
            self.scheduler.notify()
            return shares

    def ghz_recv(self, at: int) -> QubitHandle:
        self._check_node(at)
        queue = self._ghz_pending[at]
        with self.cond:
            self.scheduler.wait_until(lambda: bool(queue), "GHZ share")
            h = queue.popleft()
            self.trace.emit(at, "ghz", op="recv", qubit=h.id)
            return h

    # -- classical plane ---------------------------------------------------

    def csend(self, frm: int, to: int, msg: ClassicalMessage) -> None:
        self._check_node(frm)
        self._check_node(to)
        with self.cond:
            self._channels.setdefault((frm, to), deque()).append(msg)
            self.trace.emit(frm, "csend", to=to, tag=msg.tag, payload=",".join(map(str, msg.payload)))
            self.scheduler.notify()

    def crecv(self, at: int, frm: int, tag: str) -> ClassicalMessage:
        self._check_node(at)
        self._check_node(frm)
        with self.cond:
            queue = self._channels.setdefault((frm, at), deque())
            self.scheduler.wait_until(lambda: bool(queue), f"message {tag!r} from rank {frm}")
            head = queue[0]
            if head.tag != tag:
                raise TagMismatch(f"rank {at} expected {tag!r} from rank {frm}, head is {head.tag!r}")
            queue.popleft()
            self.trace.emit(at, "crecv", frm=frm, tag=tag, payload=",".join(map(str, head.payload)))
            return head

    # -- synchronisation ---------------------------------------------------

    def barrier(self, rank: int) -> int:
        """Block until every rank has entered this barrier generation; returns it."""
        self._check_node(rank)
        with self.cond:
            self._barrier_calls[rank] += 1
            gen = self._barrier_calls[rank]
            self.trace.emit(rank, "barrier", generation=gen)
            self.scheduler.notify()
            self.scheduler.wait_until(
                lambda: min(self._barrier_calls) >= gen, f"barrier generation {gen}"
            )
            return gen

    def collective_mark(self, rank: int, op: str, **details) -> None:
        with self.cond:
            self.trace.emit(rank, "collective", op=op, **details)
