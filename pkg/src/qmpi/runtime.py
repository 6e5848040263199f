"""SPMD launcher.

A program is one entry procedure ``entry(ctx)`` registered under a name.
:func:`launch` builds a fabric, spawns one execution context per rank (a
thread), hands each a :class:`RankContext` carrying its injected rank, size
and communicator, and collects outputs, surfaced results and the trace.

Configuration file format (all keys optional except where noted)::

    # comment
    size = 3                       # must equal the launch's rank count if given
    connectivity = mesh            # or: pairs:(0,1),(1,2)
    qubit_cap = 24
    seed = 7                       # used when the launch gives no seed

Unknown keys are errors.
"""
from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable

from .communicator import Communicator
from .errors import (
    ConfigError,
    DeadlockTimeout,
    DuplicateName,
    GlobalDeadlock,
    QmpiError,
    RankPanic,
    RankShutdown,
    UnknownProgram,
)
from .fabric import Network, TopologyConfig
from .p2p import as_handle
from .scheduling import DEFAULT_TIMEOUT, SCHEDULERS
from .trace import TraceLog


class LaunchError(QmpiError, ValueError):
    pass


@dataclass(frozen=True)
class Program:
    name: str
    entry: Callable
    min_ranks: int = 1


_REGISTRY: dict[str, Program] = {}


def register_program(name: str, entry: Callable, *, min_ranks: int = 1, replace: bool = False) -> None:
    if name in _REGISTRY and not replace:
        raise DuplicateName(f"program {name!r} is already registered")
    _REGISTRY[name] = Program(name, entry, min_ranks)


def unregister_program(name: str) -> None:
    _REGISTRY.pop(name, None)


def get_program(name: str) -> Program:
    _load_builtins()
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownProgram(f"no program named {name!r}; known: {sorted(_REGISTRY)}") from None


def registered_programs() -> list[str]:
    _load_builtins()
    return sorted(_REGISTRY)


def _load_builtins():
    from . import programs  # noqa: F401  (registers on import)


@dataclass
class LaunchSpec:
    program_name: str
    num_ranks: int
    config_path: str | None = None
    seed: int | None = None
    scheduler: str = "round-robin-deterministic"
    trace_path: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    args: dict = field(default_factory=dict)
    capture_snapshots: bool = False

    def validate(self):
        if self.num_ranks < 1:
            raise LaunchError(f"num_ranks must be >= 1, got {self.num_ranks}")
        if self.scheduler not in SCHEDULERS:
            raise LaunchError(f"unknown scheduler {self.scheduler!r}; choose from {sorted(SCHEDULERS)}")


@dataclass
class RunReport:
    program: str
    size: int
    seed: int
    outputs: list = field(default_factory=list)      # (rank, line) in emission order
    results: dict = field(default_factory=dict)      # rank -> list of surfaced values
    snapshots: dict = field(default_factory=dict)    # checkpoint label -> amplitudes
    published: dict = field(default_factory=dict)    # rank -> {key: object}
    wall_time: float = 0.0
    trace: TraceLog | None = None
    trace_path: str | None = None
    fabric: Network | None = None

    def lines(self, rank=None) -> list[str]:
        return [line for r, line in self.outputs if rank is None or r == rank]

    def bitstring(self) -> str:
        """Concatenate every rank's surfaced values in rank order."""
        return "".join(str(v) for r in range(self.size) for v in self.results.get(r, []))


class RankContext:
    """What a program sees: its rank, the size, its communicator and sinks."""

    def __init__(self, rank: int, size: int, comm: Communicator, run: "_Run"):
        self.rank = rank
        self.size = size
        self.comm = comm
        self.args = run.spec.args
        self._run = run

    def print(self, *parts) -> None:
        self._run.emit_output(self.rank, " ".join(str(p) for p in parts))

    log = print

    def result(self, value) -> None:
        """Surface a value (typically a measured bit) in the run report."""
        self._run.report.results.setdefault(self.rank, []).append(value)

    def publish(self, key: str, value) -> None:
        """Attach an arbitrary object to the report (for inspection after the run)."""
        self._run.report.published.setdefault(self.rank, {})[key] = value

    def checkpoint(self, label: str, qubits) -> None:
        """Collective: record the joint state of every rank's ``qubits``.

        A no-op unless the launch asked for snapshots, so programs can leave
        checkpoints in place without changing normal runs.
        """
        if not self._run.spec.capture_snapshots:
            return
        self._run.checkpoint_handles.setdefault(label, {})[self.rank] = [as_handle(q) for q in qubits]
        self.comm.barrier()
        if self.rank == 0:
            by_rank = self._run.checkpoint_handles[label]
            handles = [h for r in range(self.size) for h in by_rank.get(r, [])]
            self._run.report.snapshots[label] = self.comm.fabric.snapshot(handles)
        self.comm.barrier()


class _Run:
    def __init__(self, spec: LaunchSpec, program: Program, fabric: Network, report: RunReport):
        self.spec = spec
        self.program = program
        self.fabric = fabric
        self.report = report
        self.checkpoint_handles: dict = {}
        self.failures: list[tuple[int, BaseException]] = []
        self._lock = threading.Lock()

    def emit_output(self, rank, line):
        with self._lock:
            self.report.outputs.append((rank, line))

    def rank_main(self, rank: int) -> None:
        sched = self.fabric.scheduler
        failed = False
        try:
            sched.enter(rank)
            if sched.shutting_down:
                raise RankShutdown("run aborted before rank started")
            comm = Communicator(rank, self.spec.num_ranks, self.fabric)
            self.program.entry(RankContext(rank, self.spec.num_ranks, comm, self))
        except BaseException as exc:  # noqa: BLE001  (reported via RankPanic)
            failed = True
            with self._lock:
                self.failures.append((rank, exc))
        finally:
            sched.exit(rank, failed)


def build_config(spec: LaunchSpec) -> TopologyConfig:
    defaults = {"size": spec.num_ranks}
    if spec.config_path:
        cfg = TopologyConfig.load(spec.config_path, defaults, seed=spec.seed)
    else:
        cfg = TopologyConfig(size=spec.num_ranks, seed=spec.seed or 0)
    if cfg.size != spec.num_ranks:
        raise ConfigError(f"config size {cfg.size} does not match -n {spec.num_ranks}")
    return cfg


def launch(spec: LaunchSpec) -> RunReport:
    """Run ``spec.program_name`` on ``spec.num_ranks`` ranks and report.

    Raises RankPanic naming the first rank that failed (GlobalDeadlock when
    that failure was a deadlock).
    """
    spec.validate()
    program = get_program(spec.program_name)
    if spec.num_ranks < program.min_ranks:
        raise LaunchError(
            f"program {program.name!r} needs at least {program.min_ranks} ranks, got {spec.num_ranks}"
        )
    config = build_config(spec)
    scheduler = SCHEDULERS[spec.scheduler](timeout=spec.timeout)
    fabric = Network(config, scheduler=scheduler)
    report = RunReport(program=program.name, size=config.size, seed=config.seed,
                       trace=fabric.trace, fabric=fabric)
    run = _Run(spec, program, fabric, report)

    start = time.perf_counter()
    scheduler.start(config.size)
    threads = [
        threading.Thread(target=run.rank_main, args=(r,), name=f"rank-{r}", daemon=True)
        for r in range(config.size)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    report.wall_time = time.perf_counter() - start

    if spec.trace_path:
        fabric.trace.write(spec.trace_path)
        report.trace_path = spec.trace_path

    primary = [(r, e) for r, e in run.failures if not isinstance(e, RankShutdown)]
    if primary or run.failures:
        rank, exc = (primary or run.failures)[0]
        cls = GlobalDeadlock if isinstance(exc, DeadlockTimeout) else RankPanic
        raise cls(rank, exc) from exc
    return report


def run_shots(spec: LaunchSpec, shots: int) -> tuple[Counter, RunReport]:
    """Launch ``shots`` times with seeds ``seed + k`` and count bitstrings.

    Returns the counts and the first shot's full report.
    """
    if shots < 1:
        raise LaunchError(f"shots must be >= 1, got {shots}")
    base = spec.seed or 0
    counts: Counter = Counter()
    first = None
    for k in range(shots):
        shot = replace(spec, seed=base + k, trace_path=spec.trace_path if k == 0 else None)
        report = launch(shot)
        counts[report.bitstring()] += 1
        if first is None:
            first = report
    return counts, first

