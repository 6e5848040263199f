import numpy as np
import pytest

import oracle
from conftest import random_state, spmd
from qmpi.communicator import Communicator
from qmpi.engine import fidelity
from qmpi.errors import DeadHandle, GlobalDeadlock, NotOwner, SelfSend, TagMismatch, UnknownNode
from qmpi.fabric import ClassicalMessage, Network, TopologyConfig
from qmpi.p2p import TELEPORT_TAG
from qmpi.scheduling import RoundRobinScheduler

S = 1 / np.sqrt(2)


def teleport(psi, *, forced=None, seed=0):
    """Send ``psi`` from rank 0 to rank 1; return (received snapshot, report)."""
    def prog(ctx):
        comm = ctx.comm
        if ctx.rank == 0:
            q = comm.qubit()
            comm.fabric.engine.prepare(q.handle, psi)
            if forced is not None:
                comm.fabric.engine.force_outcomes(forced)
            comm.qsend(q, 1)
        else:
            ctx.publish("q", comm.qrecv(0))

    rep = spmd(2, prog, seed=seed)
    q = rep.published[1]["q"]
    return rep.fabric.snapshot([q.handle]), rep


def corrections(rep):
    (rec,) = [r for r in rep.trace if r.kind == "csend" and r.details["tag"] == TELEPORT_TAG]
    return tuple(int(b) for b in rec.details["payload"].split(","))


class TestQsendQrecv:
    @pytest.mark.parametrize("m1,m2", oracle.branches(2))
    def test_one_survives_every_branch(self, m1, m2):
        received, rep = teleport([0, 1], forced=[m1, m2])
        assert corrections(rep) == (m1, m2)
        np.testing.assert_allclose(received, [0, 1], atol=1e-12)
        np.testing.assert_allclose(oracle.teleport_branch(np.array([0, 1]), m1, m2), [0, 1], atol=1e-12)

    def test_zero(self):
        received, _ = teleport([1, 0])
        np.testing.assert_allclose(received, [1, 0], atol=1e-12)

    @pytest.mark.parametrize("m1,m2", oracle.branches(2))
    def test_real_amplitudes_every_branch(self, m1, m2):
        psi = np.array([0.6, 0.8])
        received, _ = teleport(psi, forced=[m1, m2])
        np.testing.assert_allclose(received, [0.6, 0.8], atol=1e-9)
        np.testing.assert_allclose(received, oracle.teleport_branch(psi, m1, m2), atol=1e-9)
        assert fidelity(received, psi) >= 1 - 1e-9

    def test_resource_hygiene(self):
        received, rep = teleport([S, S])
        assert rep.fabric.engine.num_qubits == 1
        assert all(s.in_flight == 0 for s in rep.fabric.sockets.values())

    def test_correction_order_is_x_then_z(self):
        _, rep = teleport([0.6, 0.8], forced=[1, 1])
        gates = [r.details["gate"] for r in rep.trace if r.kind == "gate" and r.rank == 1]
        assert gates == ["X", "Z"]

    def test_z_before_x_equivalent_up_to_phase(self):
        psi = np.array([0.6, 0.8j])
        xz = oracle.phase_fix(oracle.Z @ oracle.X @ psi)
        zx = oracle.phase_fix(oracle.X @ oracle.Z @ psi)
        np.testing.assert_allclose(xz, zx, atol=1e-12)

    def test_plus_statistics(self):
        def prog(ctx):
            comm = ctx.comm
            for _ in range(10000):
                if ctx.rank == 0:
                    q = comm.qubit()
                    q.h()
                    comm.qsend(q, 1)
                else:
                    q = comm.qrecv(0)
                    ctx.result(q.measure())
                    q.free()

        rep = spmd(2, prog, seed=17)
        ones = sum(rep.results[1])
        assert abs(ones / 10000 - 0.5) <= 0.015
        assert rep.fabric.engine.num_qubits == 0


class TestErrors:
    def setup_method(self):
        self.fab = Network(TopologyConfig(size=2), scheduler=RoundRobinScheduler())
        self.c0 = Communicator(0, 2, self.fab)
        self.c1 = Communicator(1, 2, self.fab)

    def test_self_send(self):
        with pytest.raises(SelfSend):
            self.c0.qsend(self.c0.qubit(), 0)
        with pytest.raises(SelfSend):
            self.c0.qrecv(0)

    def test_unknown_dest(self):
        with pytest.raises(UnknownNode):
            self.c0.qsend(self.c0.qubit(), 5)

    def test_not_owner(self):
        q = self.c1.qubit()
        with pytest.raises(NotOwner):
            self.c0.qsend(q.handle, 1)

    def test_dead_handle(self):
        q = self.c0.qubit()
        q.free()
        with pytest.raises(DeadHandle):
            self.c0.qsend(q, 1)

    def test_qrecv_with_no_sender(self):
        with pytest.raises(GlobalDeadlock):
            spmd(2, lambda ctx: ctx.comm.qrecv(0) if ctx.rank == 1 else None)

    def test_tag_mismatch(self):
        sock = self.c0.epr_table[1]
        self.fab.epr_create(sock, 0)
        self.fab.csend(0, 1, ClassicalMessage("other", [0]))
        with pytest.raises(TagMismatch):
            self.c1.qrecv(0)


class TestEntangledPayload:
    @pytest.mark.parametrize("m1,m2", oracle.branches(2))
    def test_bell_half_teleport_preserves_bell(self, m1, m2):
        def prog(ctx):
            comm = ctx.comm
            if ctx.rank == 0:
                a, b = comm.qubit(), comm.qubit()
                a.h()
                a.cnot(b)
                comm.fabric.engine.force_outcomes([m1, m2])
                comm.qsend(b, 1)
                ctx.publish("q", a)
            else:
                ctx.publish("q", comm.qrecv(0))

        rep = spmd(2, prog)
        pair = [rep.published[r]["q"].handle for r in (0, 1)]
        np.testing.assert_allclose(rep.fabric.snapshot(pair), [S, 0, 0, S], atol=1e-9)

    def test_chain_of_random_states(self, rng):
        for _ in range(10):
            psi = random_state(rng)

            def prog(ctx, psi=psi):
                comm = ctx.comm
                if ctx.rank == 0:
                    q = comm.qubit()
                    comm.fabric.engine.prepare(q.handle, psi)
                else:
                    q = comm.qrecv(ctx.rank - 1)
                if ctx.rank < 2:
                    comm.qsend(q, ctx.rank + 1)
                else:
                    ctx.publish("q", q)

            rep = spmd(3, prog, seed=int(rng.integers(1 << 30)))
            out = rep.fabric.snapshot([rep.published[2]["q"].handle])
            assert fidelity(out, psi) >= 1 - 1e-9

    def test_ghz_share_teleport(self):
        def prog(ctx):
            comm = ctx.comm
            if ctx.rank == 0:
                comm.fabric.ghz_create([0, 1, 2], 0)
            share = comm.fabric.ghz_recv(ctx.rank)
            if ctx.rank == 2:
                comm.qsend(share, 0)
                return
            ctx.publish("q", comm.wrap(share))
            if ctx.rank == 0:
                ctx.publish("moved", comm.qrecv(2))

        rep = spmd(3, prog, seed=5)
        handles = [rep.published[0]["q"].handle, rep.published[1]["q"].handle, rep.published[0]["moved"].handle]
        assert [h.owner for h in handles] == [0, 1, 0]
        np.testing.assert_allclose(rep.fabric.snapshot(handles), oracle.ghz(3), atol=1e-9)


def test_fidelity_sweep_covers_all_branches(rng):
    seen = set()
    for k in range(100):
        psi = random_state(rng)
        received, rep = teleport(psi, seed=k)
        seen.add(corrections(rep))
        assert fidelity(received, psi) >= 1 - 1e-9
    assert seen == set(oracle.branches(2))
