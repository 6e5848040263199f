"""Pass a |+> qubit along the ranks 0 -> 1 -> ... -> size-1 and measure it at the end."""
from ..runtime import register_program


def main(ctx):
    comm, rank, size = ctx.comm, ctx.rank, ctx.size
    if rank == 0:
        q = comm.qubit()
        q.h()
    else:
        q = comm.qrecv(rank - 1)
    if rank < size - 1:
        comm.qsend(q, rank + 1)
        ctx.print(f"sent a qubit to rank {rank + 1}")
        return
    bit = q.measure()
    q.free()
    ctx.print(f"measured {bit}")
    ctx.result(bit)


register_program("teleport", main, min_ranks=2)
