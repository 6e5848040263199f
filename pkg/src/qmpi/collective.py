"""Collective quantum operations.

Every rank of the communicator must call the same collective, in the same
order, with the same root.  Classical tags and payloads:

=================  ======================  =====================================
tag                direction               payload
=================  ======================  =====================================
``scatter-hdr``    root -> rank i          ``[i, size]`` sent before each teleport
``gather-hdr``     rank i -> root          ``[i]`` sent before each teleport
``expose-corr``    root -> every non-root  ``[m]`` outcome of the root's GHZ share
``unexpose-corr``  non-root -> root        ``[m_i]`` X-basis outcome of the share
=================  ======================  =====================================
"""
from __future__ import annotations

from dataclasses import dataclass

from . import p2p
from .errors import (
    NestedExpose,
    NotOwner,
    ProtocolError,
    ShareTampered,
    StaleContext,
    WrongCount,
)


def _check_owned(comm, handles):
    owners = comm.fabric.engine._owners
    for h in handles:
        if owners.get(h.id) != comm.rank:
            raise NotOwner(f"root rank {comm.rank} does not own qubit {h.id}")


def qscatter(comm, qubits, root: int = 0) -> list:
    """Send ``qubits[i]`` from ``root`` to rank ``i``; each rank gets a 1-element list.

    ``qubits`` is only read on the root.  The root's own element stays in place.
    """
    fabric, rank, size = comm.fabric, comm.rank, comm.size
    if rank == root:
        qubits = list(qubits)
        if len(qubits) != size:
            raise WrongCount(f"qscatter root needs {size} qubits, got {len(qubits)}")
        handles = [p2p.as_handle(q) for q in qubits]
        _check_owned(comm, handles)
        fabric.collective_mark(rank, "qscatter", root=root)
        for i, h in enumerate(handles):
            if i == root:
                continue
            comm.send(i, "scatter-hdr", (i, size))
            p2p.qsend(comm, h, i)
        mine = comm.wrap(handles[root])
    else:
        fabric.collective_mark(rank, "qscatter", root=root)
        hdr = comm.recv(root, "scatter-hdr")
        if tuple(hdr) != (rank, size):
            raise ProtocolError(f"rank {rank} got scatter header {hdr!r}")
        mine = p2p.qrecv(comm, root)
    fabric.flush(rank)
    return [mine]


def qgather(comm, qubit, root: int = 0) -> list:
    """Collect one qubit from every rank onto ``root``, ordered by source rank.

    Non-roots return an empty list; their qubit has been consumed.
    """
    fabric, rank, size = comm.fabric, comm.rank, comm.size
    h = p2p.as_handle(qubit)
    _check_owned(comm, [h])
    fabric.collective_mark(rank, "qgather", root=root)
    if rank != root:
        comm.send(root, "gather-hdr", (rank,))
        p2p.qsend(comm, h, root)
        fabric.flush(rank)
        return []
    gathered = []
    for i in range(size):
        if i == root:
            gathered.append(comm.wrap(h))
            continue
        hdr = comm.recv(i, "gather-hdr")
        if tuple(hdr) != (i,):
            raise ProtocolError(f"root got gather header {hdr!r} from rank {i}")
        gathered.append(p2p.qrecv(comm, i))
    fabric.flush(rank)
    return gathered


@dataclass(eq=False)
class ExposedContext:
    """Live exposure on one rank.

    ``local_share`` is the original data qubit on the root and the rank's
    GHZ-derived share elsewhere.
    """

    root: int
    local_share: object
    generation: int
    live: bool = True


def expose(comm, qubits, root: int = 0) -> ExposedContext:
    """Spread the root's data qubit a|0>+b|1> into a|0...0>+b|1...1> over all ranks.

    On non-roots a list argument receives the local share, so
    ``qubits[0]`` refers to it afterwards on every rank.
    """
    fabric, rank, size = comm.fabric, comm.rank, comm.size
    if comm._exposed is not None and comm._exposed.live:
        raise NestedExpose(f"rank {rank} already has a live exposure (generation {comm._exposed.generation})")
    generation = comm._expose_generation + 1

    if rank == root:
        items = list(qubits)
        if len(items) != 1:
            raise WrongCount(f"expose takes exactly one root qubit, got {len(items)}")
        data = p2p.as_handle(items[0])
        _check_owned(comm, [data])
        fabric.collective_mark(rank, "expose", root=root, generation=generation)
        if size > 1:
            fabric.ghz_create(list(range(size)), root)
            share = fabric.ghz_recv(rank)
            fabric.apply_gate(rank, "CNOT", [data, share])
            m = fabric.measure(rank, share)
            fabric.free(rank, share)
            for r in range(size):
                if r != root:
                    comm.send(r, "expose-corr", (m,))
        local = items[0] if hasattr(items[0], "handle") else comm.wrap(data)
    else:
        fabric.collective_mark(rank, "expose", root=root, generation=generation)
        share = fabric.ghz_recv(rank)
        (m,) = comm.recv(root, "expose-corr")
        if m:
            fabric.apply_gate(rank, "X", [share])
        local = comm.wrap(share)
        if isinstance(qubits, list):
            qubits.append(local)

    fabric.flush(rank)
    ctx = ExposedContext(root, local, generation)
    comm._exposed = ctx
    comm._expose_generation = generation
    return ctx


def unexpose(comm, ctx: ExposedContext | None, root: int = 0) -> None:
    """Undo :func:`expose`: the root's data qubit becomes private again."""
    fabric, rank, size = comm.fabric, comm.rank, comm.size
    if ctx is None or not ctx.live or ctx is not comm._exposed:
        raise StaleContext(f"rank {rank} has no live exposure to release")
    if ctx.root != root:
        raise ProtocolError(f"exposure rooted at {ctx.root}, unexpose called with root {root}")
    fabric.collective_mark(rank, "unexpose", root=root, generation=ctx.generation)
    share = p2p.as_handle(ctx.local_share)
    engine = fabric.engine
    if rank != root:
        if not engine.is_live(share) or engine.was_measured(share):
            raise ShareTampered(f"rank {rank} share {share.id} was measured or freed while exposed")
        fabric.apply_gate(rank, "H", [share])
        m = fabric.measure(rank, share)
        fabric.free(rank, share)
        comm.send(root, "unexpose-corr", (m,))
    else:
        parity = 0
        for r in range(size):
            if r != root:
                (m,) = comm.recv(r, "unexpose-corr")
                parity ^= m
        if parity:
            fabric.apply_gate(rank, "Z", [share])
    ctx.live = False
    comm._exposed = None
    fabric.flush(rank)
