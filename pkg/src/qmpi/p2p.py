"""Point-to-point quantum transfer by teleportation.

Wire format: after the sender's Bell measurement one classical message is
sent on the (sender, receiver) channel with tag ``"teleport-corr"`` and
payload ``[m1, m2]``, where ``m1`` is the payload outcome (measured after the
Hadamard) and ``m2`` the outcome of the sender's EPR half.
"""
from __future__ import annotations

from .engine import QubitHandle
from .errors import DeadHandle, NotOwner, ProtocolError, SelfSend, UnknownNode

TELEPORT_TAG = "teleport-corr"


def as_handle(q) -> QubitHandle:
    return getattr(q, "handle", q)


def _check_peer(comm, peer: int) -> None:
    if peer == comm.rank:
        raise SelfSend(f"rank {comm.rank} cannot teleport to itself")
    if not isinstance(peer, int) or not 0 <= peer < comm.size:
        raise UnknownNode(f"no rank {peer!r} in a communicator of size {comm.size}")


def qsend(comm, payload, dest: int) -> None:
    """Teleport ``payload`` to ``dest``; the local handle is dead afterwards.

    Returns once the correction bits are queued, without waiting for the
    receiver to apply them.
    """
    _check_peer(comm, dest)
    q = as_handle(payload)
    fabric, rank = comm.fabric, comm.rank
    engine = fabric.engine
    if not engine.is_live(q):
        raise DeadHandle(f"qubit {q.id} is not live")
    owner = engine._owners[q.id]
    if owner != rank:
        raise NotOwner(f"rank {rank} cannot send qubit {q.id} owned by rank {owner}")

    epr = fabric.epr_create(comm.socket_to(dest), rank)
    fabric.apply_gate(rank, "CNOT", [q, epr])
    fabric.apply_gate(rank, "H", [q])
    m1 = fabric.measure(rank, q)
    m2 = fabric.measure(rank, epr)
    comm.send(dest, TELEPORT_TAG, (m1, m2))
    fabric.free(rank, q)
    fabric.free(rank, epr)
    fabric.flush(rank)


def qrecv(comm, source: int):
    """Receive a teleported qubit from ``source`` and return it as a local Qubit."""
    _check_peer(comm, source)
    fabric, rank = comm.fabric, comm.rank
    epr = fabric.epr_recv(comm.socket_to(source), rank)
    corr = comm.recv(source, TELEPORT_TAG)
    if len(corr) != 2 or any(b not in (0, 1) for b in corr):
        raise ProtocolError(f"malformed teleport corrections {corr!r}")
    m1, m2 = corr
    if m2 == 1:
        fabric.apply_gate(rank, "X", [epr])
    if m1 == 1:
        fabric.apply_gate(rank, "Z", [epr])
    fabric.flush(rank)
    return comm.wrap(epr)


# Same protocol; the separate name marks the entangled-payload scenario.
qsend_entangled_half = qsend
