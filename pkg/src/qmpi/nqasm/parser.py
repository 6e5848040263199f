"""Parser and disassembler for the assembly subset.

Syntax: one instruction per line, ``opcode operand ...`` separated by
whitespace, ``#`` starts a comment.  Operands are registers ``R0``-``R15``
(case-insensitive), memory addresses ``@0``-``@255`` and integer immediates.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import BadArity, BadOperand, UnknownOpcode

NUM_REGISTERS = 16
MEMORY_SIZE = 256

REG, ADDR, IMM = "register", "address", "immediate"

# opcode -> operand kinds; a trailing None marks the remaining kinds optional.
SIGNATURES = {
    "set": (REG, IMM),
    "qalloc": (REG,),
    "init": (REG,),
    "store": (IMM, ADDR),
    "create_epr": (IMM, IMM, IMM, IMM, ADDR),
    "recv_epr": (IMM, IMM, IMM, IMM, ADDR),
    "wait_all": (ADDR,),
    "cnot": (REG, REG),
    "h": (REG,),
    # Subset extension: an optional second register makes the gate
    # conditional on that register being non-zero.
    "x": (REG, None, REG),
    "z": (REG, None, REG),
    "meas": (REG, REG),
    "qfree": (REG,),
    "csend_bit": (REG,),
    "crecv_bit": (REG,),
}


def _arity(opcode):
    sig = SIGNATURES[opcode]
    if None in sig:
        i = sig.index(None)
        return i, len(sig) - 1
    return len(sig), len(sig)


def _kinds(opcode):
    return [k for k in SIGNATURES[opcode] if k is not None]


@dataclass(frozen=True)
class Operand:
    kind: str
    value: int

    def __str__(self):
        if self.kind == REG:
            return f"R{self.value}"
        if self.kind == ADDR:
            return f"@{self.value}"
        return str(self.value)


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=1, compare=False)

    def __str__(self):
        return " ".join([self.opcode, *map(str, self.operands)])


@dataclass
class NqasmProgram:
    instructions: list

    @property
    def source_map(self) -> dict:
        return {i: (ins.line, ins.column) for i, ins in enumerate(self.instructions)}

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __eq__(self, other):
        return isinstance(other, NqasmProgram) and self.instructions == other.instructions

    @property
    def opcodes(self) -> list[str]:
        return [ins.opcode for ins in self.instructions]


_TOKEN = re.compile(r"\S+")
_REG = re.compile(r"[rR](\d+)$")
_ADDR = re.compile(r"@(\d+)$")
_IMM = re.compile(r"[+-]?\d+$")


def _operand(tok: str, expected: str, line: int, col: int) -> Operand:
    if m := _REG.match(tok):
        kind, value, bound = REG, int(m.group(1)), NUM_REGISTERS
    elif m := _ADDR.match(tok):
        kind, value, bound = ADDR, int(m.group(1)), MEMORY_SIZE
    elif _IMM.match(tok):
        kind, value, bound = IMM, int(tok), None
    else:
        raise BadOperand(f"cannot parse operand {tok!r}", line, col)
    if kind != expected:
        raise BadOperand(f"expected {expected}, got {kind} {tok!r}", line, col)
    if bound is not None and not 0 <= value < bound:
        raise BadOperand(f"{kind} {tok!r} out of range 0..{bound - 1}", line, col)
    return Operand(kind, value)


def parse(text: str) -> NqasmProgram:
    instructions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        code = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(code)]
        if not tokens:
            continue
        (word, col), rest = tokens[0], tokens[1:]
        opcode = word.lower()
        if opcode not in SIGNATURES:
            raise UnknownOpcode(f"unknown opcode {word!r}", lineno, col)
        lo, hi = _arity(opcode)
        if not lo <= len(rest) <= hi:
            want = str(lo) if lo == hi else f"{lo}-{hi}"
            raise BadArity(f"{opcode} takes {want} operand(s), got {len(rest)}", lineno, col)
        kinds = _kinds(opcode)
        operands = tuple(_operand(tok, kinds[i], lineno, c) for i, (tok, c) in enumerate(rest))
        instructions.append(Instruction(opcode, operands, lineno, col))
    return NqasmProgram(instructions)


def disassemble(program: NqasmProgram) -> str:
    return "".join(f"{ins}\n" for ins in program.instructions)
