"""MPI-style message passing for simulated distributed quantum programs."""
from .collective import ExposedContext, expose, qgather, qscatter, unexpose
from .communicator import Communicator, Qubit
from .engine import QuantumEngine, QubitHandle, canonical_phase, fidelity
from .fabric import ClassicalMessage, EprSocket, Network, TopologyConfig
from .p2p import qrecv, qsend
from .runtime import (
    LaunchSpec,
    RankContext,
    RunReport,
    launch,
    register_program,
    registered_programs,
    run_shots,
)
from .trace import TraceLog, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "ClassicalMessage", "Communicator", "EprSocket", "ExposedContext", "LaunchSpec",
    "Network", "QuantumEngine", "Qubit", "QubitHandle", "RankContext", "RunReport",
    "TopologyConfig", "TraceLog", "TraceRecord", "canonical_phase", "expose", "fidelity",
    "launch", "qgather", "qrecv", "qscatter", "qsend", "register_program",
    "registered_programs", "run_shots", "unexpose",
]
