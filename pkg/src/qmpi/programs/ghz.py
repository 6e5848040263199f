"""Distributed GHZ state across every rank of the run.

The same source runs at any size; only the launcher's rank count changes.
"""
from ..runtime import register_program

ROOT = 0


def ghz_example(comm, root=ROOT, checkpoint=None):
    """Build (|0...0> + |1...1>)/sqrt(2) over all ranks; return this rank's measured bit.

    The root's superposed qubit is exposed, every other rank copies the
    exposed basis value onto a fresh local qubit with a CNOT, and unexpose
    hands the root qubit back.  ``checkpoint(label, qubits)`` is called just
    before measurement when given.
    """
    if comm.size < 2:
        raise ValueError("the GHZ example needs at least 2 ranks")
    qubits = []
    if comm.rank == root:
        q = comm.qubit()
        q.h()
        qubits.append(q)

    comm.expose(qubits, root_rank=root)
    if comm.rank == root:
        mine = qubits[0]
    else:
        mine = comm.qubit()
        qubits[0].cnot(mine)
    comm.unexpose(root_rank=root)

    if checkpoint is not None:
        checkpoint("pre-measure", [mine])
    bit = mine.measure()
    mine.free()
    return bit


def main(ctx):
    ctx.result(ghz_example(ctx.comm, checkpoint=ctx.checkpoint))


register_program("ghz", main, min_ranks=2)
