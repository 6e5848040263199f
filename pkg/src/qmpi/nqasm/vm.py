"""Interpreter for parsed assembly programs.

Each rank runs its own VM against its communicator, so assembly programs
share the fabric, locality checks and trace with the high-level API.

Operand conventions for the EPR instructions::

    create_epr <remote> <socket> <reserved> <reserved> @a
    recv_epr   <remote> <socket> <reserved> <reserved> @a

``@a`` holds the argument array: ``@a`` = number of pairs (only 1 is
supported) and ``@a+1`` = request type (0, keep).  The remote operand is
informational; the VM's ``peer`` decides the endpoint.  The request
completes at ``wait_all @a``, which maps the local EPR half to the lowest
unused qubit id.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import (
    DoubleFree,
    NqasmError,
    NqasmRuntimeError,
    QmpiError,
    UnallocatedQubit,
)
from .parser import MEMORY_SIZE, NUM_REGISTERS, NqasmProgram

BIT_TAG = "nqasm-bit"


@dataclass
class VmState:
    registers: list = field(default_factory=lambda: [0] * NUM_REGISTERS)
    memory: list = field(default_factory=lambda: [0] * MEMORY_SIZE)
    qubit_map: dict = field(default_factory=dict)   # qubit id -> QubitHandle
    pc: int = 0
    pending: dict = field(default_factory=dict)     # address -> ("create", handle) | ("recv", None)
    freed: set = field(default_factory=set)
    fresh: set = field(default_factory=set)         # ids still in |0> since qalloc


class Vm:
    def __init__(self, comm, peer: int):
        self.comm = comm
        self.peer = peer
        self.state = VmState()

    # -- operand helpers ---------------------------------------------------

    def _reg(self, op):
        return self.state.registers[op.value]

    def _qubit(self, op, ins):
        qid = self._reg(op)
        try:
            return self.state.qubit_map[qid]
        except KeyError:
            raise UnallocatedQubit(
                f"R{op.value} holds qubit id {qid}, which is not allocated", ins.line, ins.column
            ) from None

    def _touch(self, *handles):
        for h in handles:
            for qid, mapped in self.state.qubit_map.items():
                if mapped == h:
                    self.state.fresh.discard(qid)

    # -- instructions ------------------------------------------------------

    def run(self, program: NqasmProgram) -> VmState:
        st = self.state
        while st.pc < len(program.instructions):
            ins = program.instructions[st.pc]
            try:
                getattr(self, "op_" + ins.opcode)(ins, *ins.operands)
            except NqasmError:
                raise
            except QmpiError as exc:
                raise NqasmRuntimeError(
                    f"{ins.opcode}: {type(exc).__name__}: {exc}", ins.line, ins.column
                ) from exc
            st.pc += 1
        return st

    def op_set(self, ins, reg, imm):
        self.state.registers[reg.value] = imm.value

    def op_qalloc(self, ins, reg):
        qid = self._reg(reg)
        if qid in self.state.qubit_map:
            raise NqasmRuntimeError(f"qubit id {qid} is already allocated", ins.line, ins.column)
        self.state.qubit_map[qid] = self.comm.fabric.alloc(self.comm.rank)
        self.state.freed.discard(qid)
        self.state.fresh.add(qid)

    def op_init(self, ins, reg):
        h = self._qubit(reg, ins)
        qid = self._reg(reg)
        if qid in self.state.fresh:
            return
        fabric, rank = self.comm.fabric, self.comm.rank
        if fabric.measure(rank, h):
            fabric.apply_gate(rank, "X", [h])
        self.state.fresh.add(qid)

    def op_store(self, ins, imm, addr):
        self.state.memory[addr.value] = imm.value

    def _epr_args(self, ins, addr):
        mem = self.state.memory
        count = mem[addr.value]
        kind = mem[addr.value + 1] if addr.value + 1 < MEMORY_SIZE else 0
        if count != 1 or kind != 0:
            raise NqasmRuntimeError(
                f"only single keep-type pairs are supported (got count={count}, type={kind})",
                ins.line, ins.column,
            )
        if addr.value in self.state.pending:
            raise NqasmRuntimeError(f"@{addr.value} already has an outstanding request", ins.line, ins.column)

    def op_create_epr(self, ins, remote, socket, r1, r2, addr):
        self._epr_args(ins, addr)
        h = self.comm.fabric.epr_create(self.comm.socket_to(self.peer), self.comm.rank)
        self.state.pending[addr.value] = ("create", h)

    def op_recv_epr(self, ins, remote, socket, r1, r2, addr):
        self._epr_args(ins, addr)
        self.state.pending[addr.value] = ("recv", None)

    def op_wait_all(self, ins, addr):
        try:
            kind, h = self.state.pending.pop(addr.value)
        except KeyError:
            raise NqasmRuntimeError(f"no EPR request outstanding at @{addr.value}", ins.line, ins.column) from None
        if kind == "recv":
            h = self.comm.fabric.epr_recv(self.comm.socket_to(self.peer), self.comm.rank)
        qid = 0
        while qid in self.state.qubit_map:
            qid += 1
        self.state.qubit_map[qid] = h
        self.state.freed.discard(qid)

    def _gate(self, name, ins, *regs):
        handles = [self._qubit(r, ins) for r in regs]
        self.comm.fabric.apply_gate(self.comm.rank, name, handles)
        self._touch(*handles)

    def op_cnot(self, ins, c, t):
        self._gate("CNOT", ins, c, t)

    def op_h(self, ins, q):
        self._gate("H", ins, q)

    def op_x(self, ins, q, cond=None):
        if cond is None or self._reg(cond):
            self._gate("X", ins, q)

    def op_z(self, ins, q, cond=None):
        if cond is None or self._reg(cond):
            self._gate("Z", ins, q)

    def op_meas(self, ins, q, dest):
        h = self._qubit(q, ins)
        self.state.registers[dest.value] = self.comm.fabric.measure(self.comm.rank, h)
        self._touch(h)

    def op_qfree(self, ins, reg):
        qid = self._reg(reg)
        if qid not in self.state.qubit_map and qid in self.state.freed:
            raise DoubleFree(f"qubit id {qid} was already freed", ins.line, ins.column)
        h = self._qubit(reg, ins)
        self.comm.fabric.free(self.comm.rank, h)
        del self.state.qubit_map[qid]
        self.state.freed.add(qid)
        self.state.fresh.discard(qid)

    def op_csend_bit(self, ins, reg):
        self.comm.send(self.peer, BIT_TAG, (self._reg(reg),))

    def op_crecv_bit(self, ins, reg):
        (value,) = self.comm.recv(self.peer, BIT_TAG)
        self.state.registers[reg.value] = value


def execute(program: NqasmProgram, ctx, peer: int) -> VmState:
    """Run ``program`` on the rank of ``ctx`` (a RankContext or Communicator)."""
    comm = getattr(ctx, "comm", ctx)
    return Vm(comm, peer).run(program)
