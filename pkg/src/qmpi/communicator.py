"""Per-rank communicator: the user-facing handle on the fabric."""
from __future__ import annotations

from . import collective, p2p
from .engine import QubitHandle
from .fabric import ClassicalMessage, EprSocket, Network


class Qubit:
    """A qubit owned by the rank of ``comm``.

    Thin wrapper so SPMD programs can write ``q.h(); q.cnot(t)`` while every
    call still goes through the fabric's locality checks and trace.
    """

    __slots__ = ("comm", "handle")

    def __init__(self, comm: "Communicator", handle: QubitHandle | None = None):
        self.comm = comm
        self.handle = handle if handle is not None else comm.fabric.alloc(comm.rank)

    def __repr__(self):
        return f"Qubit(id={self.handle.id}, rank={self.comm.rank})"

    def _gate(self, name, *others):
        handles = [self.handle] + [_handle(o) for o in others]
        self.comm.fabric.apply_gate(self.comm.rank, name, handles)

    def h(self):
        self._gate("H")

    def x(self):
        self._gate("X")

    def z(self):
        self._gate("Z")

    def cnot(self, target):
        self._gate("CNOT", target)

    def measure(self) -> int:
        return self.comm.fabric.measure(self.comm.rank, self.handle)

    def free(self):
        self.comm.fabric.free(self.comm.rank, self.handle)

    @property
    def live(self) -> bool:
        return self.comm.fabric.engine.is_live(self.handle)


_handle = p2p.as_handle


class Communicator:
    """Rank-local view of a run.

    Construction registers the rank with the fabric (size handshake) and
    builds the EPR-socket routing table and classical endpoints to every
    reachable peer; user code never creates sockets itself.
    """

    def __init__(self, rank: int, size: int, fabric: Network):
        fabric.register(rank, size)
        self.rank = rank
        self.size = size
        self.fabric = fabric
        peers = fabric.config.neighbours(rank)
        self.epr_table: dict[int, EprSocket] = {p: fabric.epr_socket(rank, p) for p in peers}
        self.classical_table: dict[int, tuple[int, int]] = {p: (rank, p) for p in peers}
        self.barrier_generation = 0
        self._exposed = None
        self._expose_generation = 0

    def __repr__(self):
        return f"Communicator(rank={self.rank}, size={self.size})"

    # -- local helpers -----------------------------------------------------

    def qubit(self) -> Qubit:
        """Allocate a fresh |0> qubit on this rank."""
        return Qubit(self)

    def wrap(self, handle: QubitHandle) -> Qubit:
        return Qubit(self, handle)

    def send(self, dest: int, tag: str, payload=()) -> None:
        self.fabric.csend(self.rank, dest, ClassicalMessage(tag, tuple(payload)))

    def recv(self, source: int, tag: str) -> tuple:
        return self.fabric.crecv(self.rank, source, tag).payload

    def socket_to(self, peer: int) -> EprSocket:
        try:
            return self.epr_table[peer]
        except KeyError:
            # Re-raise the fabric's own error (unknown rank or missing link).
            return self.fabric.epr_socket(self.rank, peer)

    # -- synchronisation ---------------------------------------------------

    def flush(self) -> None:
        self.fabric.flush(self.rank)

    def barrier(self) -> int:
        self.barrier_generation = self.fabric.barrier(self.rank)
        return self.barrier_generation

    # -- primitives (implemented in p2p / collective) -----------------------

    def qsend(self, qubit, dest: int) -> None:
        p2p.qsend(self, qubit, dest)

    def qrecv(self, source: int) -> Qubit:
        return p2p.qrecv(self, source)

    def qscatter(self, qubits, root: int = 0) -> list:
        return collective.qscatter(self, qubits, root)

    def qgather(self, qubit, root: int = 0) -> list:
        return collective.qgather(self, qubit, root)

    def expose(self, qubits, root_rank: int = 0):
        return collective.expose(self, qubits, root_rank)

    def unexpose(self, root_rank: int = 0, ctx=None) -> None:
        collective.unexpose(self, ctx if ctx is not None else self._exposed, root_rank)
