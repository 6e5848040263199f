"""Two-rank assembly session: rank 0 runs ``asm``, rank 1 runs ``peer_asm``."""
from pathlib import Path

from ..nqasm import execute, parse
from ..runtime import register_program


def main(ctx):
    if ctx.size != 2:
        raise ValueError("nqasm-run is a two-party session; launch with -n 2")
    key = "asm" if ctx.rank == 0 else "peer_asm"
    path = ctx.args.get(key)
    if not path:
        raise ValueError(f"nqasm-run needs --{key.replace('_', '-')}")
    state = execute(parse(Path(path).read_text()), ctx, peer=1 - ctx.rank)
    regs = " ".join(f"R{i}={v}" for i, v in enumerate(state.registers) if v)
    ctx.print(f"halted pc={state.pc} {regs}".rstrip())
    ctx.print(f"live qubits: {sorted(state.qubit_map)}")
    ctx.publish("vm", state)


register_program("nqasm-run", main, min_ranks=2)
