"""Assembly subset: parser, disassembler and per-rank interpreter."""
from importlib import resources

from .parser import Instruction, NqasmProgram, Operand, disassemble, parse
from .vm import Vm, VmState, execute

__all__ = [
    "Instruction", "NqasmProgram", "Operand", "Vm", "VmState",
    "corpus", "disassemble", "execute", "parse",
]


def corpus() -> dict[str, str]:
    """Bundled example programs, name -> source text."""
    root = resources.files(__name__) / "corpus"
    return {p.name: p.read_text() for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".nqasm")}
