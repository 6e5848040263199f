"""Root prepares one |+> per rank, scatters them, and every rank measures its share."""
from ..runtime import register_program

ROOT = 0


def main(ctx):
    comm = ctx.comm
    qubits = []
    if ctx.rank == ROOT:
        qubits = [comm.qubit() for _ in range(ctx.size)]
        for q in qubits:
            q.h()
    (mine,) = comm.qscatter(qubits, ROOT)
    bit = mine.measure()
    mine.free()
    ctx.print(f"measured {bit}")
    ctx.result(bit)


register_program("scatter", main)
