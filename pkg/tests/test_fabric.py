import itertools

import numpy as np
import pytest

from conftest import spmd
from qmpi.errors import (
    CapacityExceeded,
    ConfigError,
    DeadlockTimeout,
    DuplicateOwner,
    LocalityViolation,
    NotConnected,
    TagMismatch,
    UnknownNode,
)
from qmpi.fabric import ClassicalMessage, EprSocket, Network, TopologyConfig
from qmpi.scheduling import ConcurrentScheduler, RoundRobinScheduler

S = 1 / np.sqrt(2)


def net(size=2, scheduler=None, **kw):
    # Outside a launch the round-robin scheduler fails a blocked wait at once.
    return Network(TopologyConfig(size=size, **kw), scheduler=scheduler or RoundRobinScheduler())


class TestTopologyConfig:
    def test_defaults(self):
        cfg = TopologyConfig(size=3)
        assert cfg.connectivity == "mesh" and cfg.qubit_cap == 24 and cfg.seed == 0
        assert cfg.neighbours(1) == [0, 2]

    def test_parse(self):
        cfg = TopologyConfig.from_text(
            "# line network\nsize = 3\nconnectivity = pairs:(0,1),(1,2)\nqubit_cap=10\nseed=5\n"
        )
        assert cfg == TopologyConfig(3, ((0, 1), (1, 2)), 10, 5)
        assert cfg.connected(2, 1) and not cfg.connected(0, 2)

    @pytest.mark.parametrize("text", [
        "size=3\ncolour=blue",
        "size=three",
        "size=3\nconnectivity=ring",
        "size=3\nconnectivity=pairs:(0,1),(5,6)",
        "size=3\nconnectivity=pairs:(0,1) junk",
        "size=3\nsize=4",
        "connectivity=mesh",
        "size",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            TopologyConfig.from_text(text)

    def test_defaults_and_overrides(self):
        cfg = TopologyConfig.from_text("seed=3", {"size": 4}, seed=None)
        assert (cfg.size, cfg.seed) == (4, 3)
        assert TopologyConfig.from_text("size=2\nseed=3", seed=9).seed == 9


class TestEpr:
    def test_create_gives_bell_pair(self):
        fab = net()
        sock = fab.epr_socket(0, 1)
        a = fab.epr_create(sock, 0)
        b = fab.epr_recv(sock, 1)
        assert (a.owner, b.owner) == (0, 1)
        np.testing.assert_allclose(fab.snapshot([a, b]), [S, 0, 0, S], atol=1e-12)

    def test_fifo_pairing(self):
        fab = net()
        sock = fab.epr_socket(0, 1)
        first = fab.epr_create(sock, 0)
        second = fab.epr_create(sock, 0)
        r1 = fab.epr_recv(sock, 1)
        r2 = fab.epr_recv(sock, 1)
        np.testing.assert_allclose(fab.snapshot([first, r1]), [S, 0, 0, S], atol=1e-12)
        np.testing.assert_allclose(fab.snapshot([second, r2]), [S, 0, 0, S], atol=1e-12)
        created = [r.details["pair"] for r in fab.trace if r.kind == "epr" and r.details["op"] == "create"]
        received = [r.details["pair"] for r in fab.trace if r.kind == "epr" and r.details["op"] == "recv"]
        assert created == received == [0, 1]

    def test_not_connected_on_line_topology(self):
        fab = net(3, connectivity=((0, 1), (1, 2)))
        with pytest.raises(NotConnected):
            fab.epr_socket(0, 2)
        with pytest.raises(NotConnected):
            fab.epr_create(EprSocket(0, 2), 0)

    def test_recv_without_create_deadlocks(self):
        fab = net()
        with pytest.raises(DeadlockTimeout):
            fab.epr_recv(fab.epr_socket(0, 1), 1)

    def test_recv_times_out_under_concurrent_scheduler(self):
        fab = net(scheduler=ConcurrentScheduler(timeout=0.05))
        with pytest.raises(DeadlockTimeout):
            fab.epr_recv(fab.epr_socket(0, 1), 1)

    def test_capacity(self):
        fab = net(qubit_cap=3)
        sock = fab.epr_socket(0, 1)
        fab.epr_create(sock, 0)
        with pytest.raises(CapacityExceeded):
            fab.epr_create(sock, 0)
        assert sock.created == 1 and sock.in_flight == 1

    def test_both_directions_are_independent(self):
        fab = net()
        sock = fab.epr_socket(0, 1)
        fab.epr_create(sock, 0)
        fab.epr_create(sock, 1)
        assert fab.epr_recv(sock, 0).owner == 0
        assert fab.epr_recv(sock, 1).owner == 1

    def test_interleaved_across_ranks(self):
        """create/create on rank 0 and recv/recv on rank 1, scheduled round-robin."""
        def prog(ctx):
            fab = ctx.comm.fabric
            sock = ctx.comm.epr_table[1 - ctx.rank]
            if ctx.rank == 0:
                ctx.publish("mine", [fab.epr_create(sock, 0), fab.epr_create(sock, 0)])
            else:
                ctx.publish("mine", [fab.epr_recv(sock, 1), fab.epr_recv(sock, 1)])

        rep = spmd(2, prog)
        a, b = rep.published[0]["mine"], rep.published[1]["mine"]
        for x, y in zip(a, b):
            np.testing.assert_allclose(rep.fabric.snapshot([x, y]), [S, 0, 0, S], atol=1e-12)


class TestGhz:
    def test_three_owners(self):
        fab = net(3)
        fab.ghz_create([0, 1, 2], 0)
        shares = [fab.ghz_recv(r) for r in range(3)]
        assert [h.owner for h in shares] == [0, 1, 2]
        expected = np.zeros(8)
        expected[[0, 7]] = S
        np.testing.assert_allclose(fab.snapshot(shares), expected, atol=1e-12)

    def test_two_owners_is_a_bell_pair(self):
        fab = net(2)
        fab.ghz_create([0, 1], 0)
        np.testing.assert_allclose(fab.snapshot([fab.ghz_recv(0), fab.ghz_recv(1)]), [S, 0, 0, S], atol=1e-12)

    def test_duplicate_owner(self):
        with pytest.raises(DuplicateOwner):
            net(3).ghz_create([0, 1, 1], 0)

    def test_share_count(self):
        fab = net(4)
        shares = fab.ghz_create([0, 2, 3], 0)
        assert len(shares) == 3
        assert [len(fab._ghz_pending[r]) for r in range(4)] == [1, 0, 1, 1]

    def test_not_connected(self):
        fab = net(3, connectivity=((0, 1),))
        with pytest.raises(NotConnected):
            fab.ghz_create([0, 1, 2], 0)


class TestClassical:
    def test_round_trip(self):
        fab = net()
        fab.csend(0, 1, ClassicalMessage("corr", [1, 0]))
        assert fab.crecv(1, 0, "corr") == ClassicalMessage("corr", (1, 0))

    def test_fifo(self):
        fab = net()
        fab.csend(0, 1, ClassicalMessage("t", [1]))
        fab.csend(0, 1, ClassicalMessage("t", [2]))
        assert fab.crecv(1, 0, "t").payload == (1,)
        assert fab.crecv(1, 0, "t").payload == (2,)

    def test_unknown_node(self):
        with pytest.raises(UnknownNode):
            net().csend(0, 2, ClassicalMessage("x"))

    def test_tag_mismatch(self):
        fab = net()
        fab.csend(0, 1, ClassicalMessage("corr", [1]))
        with pytest.raises(TagMismatch):
            fab.crecv(1, 0, "ack")
        assert fab.pending_messages(0, 1) == [ClassicalMessage("corr", (1,))]

    def test_empty_queue_deadlocks(self):
        with pytest.raises(DeadlockTimeout):
            net().crecv(1, 0, "corr")

    def test_payload_is_immutable(self):
        payload = [1, 0]
        msg = ClassicalMessage("corr", payload)
        payload[0] = 7
        assert msg.payload == (1, 0)

    def test_channels_are_per_ordered_pair(self):
        fab = net(3)
        fab.csend(0, 2, ClassicalMessage("a"))
        fab.csend(1, 2, ClassicalMessage("b"))
        assert fab.crecv(2, 1, "b").tag == "b"
        assert fab.crecv(2, 0, "a").tag == "a"


class TestLocality:
    @pytest.mark.parametrize("gate", ["H", "X", "Z", "CNOT"])
    def test_gate_on_foreign_qubit_rejected(self, gate):
        fab = net()
        a = fab.alloc(0)
        b = fab.alloc(1)
        handles = [a, b] if gate == "CNOT" else [b]
        before = fab.engine.amplitudes()
        with pytest.raises(LocalityViolation):
            fab.apply_gate(0, gate, handles)
        np.testing.assert_array_equal(fab.engine.amplitudes(), before)

    def test_measure_and_free_foreign_qubit_rejected(self):
        fab = net()
        b = fab.alloc(1)
        with pytest.raises(LocalityViolation):
            fab.measure(0, b)
        with pytest.raises(LocalityViolation):
            fab.free(0, b)


def test_entanglement_accounting():
    fab = net(3)
    socks = [fab.epr_socket(0, 1), fab.epr_socket(1, 2)]
    for sock, n_create, n_recv in zip(socks, (3, 2), (1, 2)):
        for _ in range(n_create):
            fab.epr_create(sock, sock.a)
        for _ in range(n_recv):
            fab.epr_recv(sock, sock.b)
    for sock in socks:
        assert sock.created - sock.received == sock.in_flight
    assert [s.in_flight for s in socks] == [2, 0]


def test_trace_records_every_operation():
    fab = net()
    q = fab.alloc(0)
    fab.apply_gate(0, "H", [q])
    fab.measure(0, q)
    fab.free(0, q)
    sock = fab.epr_socket(0, 1)
    fab.epr_create(sock, 0)
    fab.epr_recv(sock, 1)
    fab.csend(0, 1, ClassicalMessage("t", [1]))
    fab.crecv(1, 0, "t")
    fab.flush(0)
    assert fab.trace.kinds() == ["alloc", "gate", "measure", "free", "epr", "epr", "csend", "crecv", "flush"]
    assert [r.seq for r in fab.trace] == list(range(9))
    assert fab.trace.records[2].format() == f'2 0 measure qubit="{q.id}" outcome="{fab.trace.records[2].details["outcome"]}"'


def test_classical_sequence_deterministic():
    def prog(ctx):
        comm = ctx.comm
        for peer, k in itertools.product(range(ctx.size), range(2)):
            if peer != ctx.rank:
                comm.send(peer, f"m{k}", [ctx.rank])
        for peer, k in itertools.product(range(ctx.size), range(2)):
            if peer != ctx.rank:
                comm.recv(peer, f"m{k}")

    def triples(rep):
        return [(r.rank, r.details.get("to", r.details.get("frm")), r.details["tag"])
                for r in rep.trace if r.kind in ("csend", "crecv")]

    assert triples(spmd(4, prog, seed=3)) == triples(spmd(4, prog, seed=3))
