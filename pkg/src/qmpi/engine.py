"""Global state-vector simulator shared by every node of a run.

All live qubits, whichever node owns them, are tensor factors of one
amplitude array.  Axis ``i`` of the array is the qubit at bit position
``i``; flattening it gives a big-endian vector in allocation order.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityExceeded,
    DeadHandle,
    ForcedOutcomeImpossible,
    NotSeparable,
    SameQubitCnot,
    StillEntangled,
    TooFewOwners,
)

DEFAULT_QUBIT_CAP = 24
SEPARABILITY_TOL = 1e-9
_PROB_FLOOR = 1e-12

_S = 1 / np.sqrt(2)
GATES = {
    "H": np.array([[_S, _S], [_S, -_S]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}
ARITY = {"H": 1, "X": 1, "Z": 1, "CNOT": 2}


@dataclass(frozen=True)
class QubitHandle:
    """Reference to one live qubit; ``owner`` is the rank holding it."""

    id: int
    owner: int

    def __repr__(self):
        return f"QubitHandle(id={self.id}, owner={self.owner})"


def canonical_phase(vec: np.ndarray, tol: float = SEPARABILITY_TOL) -> np.ndarray:
    """Rotate ``vec`` so its first non-negligible amplitude is real and positive."""
    vec = np.asarray(vec, dtype=complex)
    nz = np.flatnonzero(np.abs(vec) > tol)
    if nz.size == 0:
        return vec.copy()
    a = vec[nz[0]]
    return vec * (abs(a) / a)


def fidelity(a, b) -> float:
    """|<a|b>|^2 for normalised state vectors."""
    return float(abs(np.vdot(np.asarray(a), np.asarray(b))) ** 2)


class QuantumEngine:
    """Linearizable state-vector backend.

    Every public method commits atomically under an internal lock, so ranks
    running on separate threads may call in concurrently.
    """

    def __init__(self, seed: int = 0, qubit_cap: int = DEFAULT_QUBIT_CAP):
        self.seed = seed
        self.qubit_cap = qubit_cap
        self.rng_cursor = 0
        self._rng = np.random.default_rng(seed)
        self._psi = np.ones((), dtype=complex)
        self._order: list[int] = []
        self._owners: dict[int, int] = {}
        self._measured: set[int] = set()
        self._next_id = 0
        self._forced: deque[int] = deque()
        self._lock = threading.RLock()

    # -- introspection -----------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return len(self._order)

    @property
    def qubit_index(self) -> dict[int, int]:
        return {qid: pos for pos, qid in enumerate(self._order)}

    def amplitudes(self) -> np.ndarray:
        """Full amplitude vector over all live qubits in allocation order."""
        with self._lock:
            return self._psi.reshape(-1).copy()

    def norm(self) -> float:
        with self._lock:
            return float(np.sum(np.abs(self._psi) ** 2))

    def is_live(self, q: QubitHandle) -> bool:
        return q.id in self._owners

    def was_measured(self, q: QubitHandle) -> bool:
        """True if ``q`` has been measured and not touched by a gate since."""
        return q.id in self._measured

    def live_handles(self) -> list[QubitHandle]:
        with self._lock:
            return [QubitHandle(qid, self._owners[qid]) for qid in self._order]

    # -- test hooks --------------------------------------------------------

    def force_outcomes(self, bits: Iterable[int]) -> None:
        """Queue outcomes for the next measurements in commit order.

        Used by branch-enumeration tests; forcing an outcome of zero
        probability raises ForcedOutcomeImpossible.
        """
        with self._lock:
            self._forced.extend(int(b) for b in bits)

    def prepare(self, q: QubitHandle, amplitudes) -> None:
        """Overwrite a separable qubit with the normalised ``amplitudes`` (a0, a1).

        Test hook for arbitrary inputs outside the H/X/Z/CNOT gate set.
        """
        vec = np.asarray(amplitudes, dtype=complex).reshape(2)
        vec = vec / np.linalg.norm(vec)
        with self._lock:
            pos = self._pos(q)
            rest = self._factor_out(pos, q)
            psi = np.multiply.outer(rest.reshape((2,) * (self._psi.ndim - 1)), vec)
            self._psi = np.ascontiguousarray(np.moveaxis(psi, -1, pos))
            self._measured.discard(q.id)

    # -- operations --------------------------------------------------------

    def alloc_qubit(self, owner: int) -> QubitHandle:
        with self._lock:
            self._reserve(1)
            return self._alloc(owner)

    def apply_gate(self, gate: str, handles: Sequence[QubitHandle]) -> None:
        gate = gate.upper()
        if gate not in GATES:
            raise ValueError(f"unsupported gate {gate!r}")
        handles = list(handles)
        if len(handles) != ARITY[gate]:
            raise ValueError(f"{gate} acts on {ARITY[gate]} qubit(s), got {len(handles)}")
        with self._lock:
            positions = [self._pos(h) for h in handles]
            if len(set(positions)) != len(positions):
                raise SameQubitCnot(f"{gate} control and target are the same qubit")
            self._apply(GATES[gate], positions)
            for h in handles:
                self._measured.discard(h.id)

    def measure(self, q: QubitHandle) -> int:
        with self._lock:
            pos = self._pos(q)
            one = self._psi.reshape(1 << pos, 2, -1)[:, 1]
            p1 = float(np.vdot(one, one).real)
            u = self._rng.random()
            self.rng_cursor += 1
            if self._forced:
                bit = self._forced.popleft()
                p = p1 if bit else 1.0 - p1
                if p < _PROB_FLOOR:
                    raise ForcedOutcomeImpossible(
                        f"forced outcome {bit} on qubit {q.id} has probability {p:.3g}"
                    )
            else:
                bit = int(u < p1)
            p = p1 if bit else 1.0 - p1
            idx = [slice(None)] * self._psi.ndim
            idx[pos] = 1 - bit
            self._psi[tuple(idx)] = 0
            self._psi /= np.sqrt(p)
            self._measured.add(q.id)
            return bit

    def free_qubit(self, q: QubitHandle) -> None:
        with self._lock:
            pos = self._pos(q)
            rest = self._factor_out(pos, q)
            self._psi = rest.reshape((2,) * (self._psi.ndim - 1))
            del self._order[pos]
            del self._owners[q.id]
            self._measured.discard(q.id)

    def create_bell(self, owner_a: int, owner_b: int) -> tuple[QubitHandle, QubitHandle]:
        a, b = self.create_ghz([owner_a, owner_b])
        return a, b

    def create_ghz(self, owners: Sequence[int]) -> list[QubitHandle]:
        owners = list(owners)
        if len(owners) < 2:
            raise TooFewOwners(f"GHZ state needs at least 2 owners, got {len(owners)}")
        with self._lock:
            self._reserve(len(owners))
            handles = [self._alloc(o) for o in owners]
            self.apply_gate("H", [handles[0]])
            for h in handles[1:]:
                self.apply_gate("CNOT", [handles[0], h])
            return handles

    def snapshot_amplitudes(self, handles: Sequence[QubitHandle]) -> np.ndarray:
        """Reduced pure state of ``handles`` (first handle is the most significant bit).

        The listed qubits must be jointly separable from every other live
        qubit.  The result is phase-canonicalised.
        """
        with self._lock:
            positions = [self._pos(h) for h in handles]
            if len(set(positions)) != len(positions):
                raise ValueError("snapshot handles must be distinct")
            m = self._matricize(positions)
            u, s, _ = np.linalg.svd(m, full_matrices=False)
            if s.size > 1 and s[1] > SEPARABILITY_TOL:
                raise NotSeparable("requested qubits are entangled with the rest of the state")
            return canonical_phase(u[:, 0])

    def is_separable(self, handles: Sequence[QubitHandle]) -> bool:
        with self._lock:
            m = self._matricize([self._pos(h) for h in handles])
            return _second_singular_value(m) <= SEPARABILITY_TOL

    # -- internals ---------------------------------------------------------

    def _reserve(self, n: int) -> None:
        if len(self._order) + n > self.qubit_cap:
            raise CapacityExceeded(
                f"allocating {n} qubit(s) would exceed the cap of {self.qubit_cap}"
            )

    def _alloc(self, owner: int) -> QubitHandle:
        qid = self._next_id
        self._next_id += 1
        self._psi = np.multiply.outer(self._psi, np.array([1, 0], dtype=complex))
        self._order.append(qid)
        self._owners[qid] = owner
        return QubitHandle(qid, owner)

    def _pos(self, q: QubitHandle) -> int:
        if q.id not in self._owners:
            raise DeadHandle(f"qubit {q.id} is not live")
        return self._order.index(q.id)

    def _apply(self, mat: np.ndarray, positions: list[int]) -> None:
        n = self._psi.ndim
        if len(positions) == 1:
            (p,) = positions
            view = self._psi.reshape(1 << p, 2, 1 << (n - p - 1))
            self._psi = np.matmul(mat, view).reshape(self._psi.shape)
            return
        if mat is GATES["CNOT"]:
            # Swap the target's 0/1 slices inside the control=1 subspace.
            c, t = positions
            psi = self._psi.copy()
            idx = [slice(None)] * n
            idx[c] = 1
            sub = psi[tuple(idx)]
            sub[...] = np.flip(sub, axis=t if t < c else t - 1)
            self._psi = psi
            return
        k = len(positions)
        t = mat.reshape((2,) * (2 * k))
        out = np.tensordot(t, self._psi, axes=(list(range(k, 2 * k)), positions))
        self._psi = np.ascontiguousarray(np.moveaxis(out, list(range(k)), positions))

    def _factor_out(self, pos: int, q: QubitHandle) -> np.ndarray:
        """State of every other qubit, flattened; requires ``q`` to be separable."""
        m = np.moveaxis(self._psi, pos, 0).reshape(2, -1)
        norms = np.linalg.norm(m, axis=1)
        # A measured qubit leaves one row empty: separable without an SVD.
        if norms.min() > SEPARABILITY_TOL and _second_singular_value(m) > SEPARABILITY_TOL:
            raise StillEntangled(f"qubit {q.id} is entangled with other live qubits")
        row = m[int(np.argmax(norms))]
        return row / norms.max()

    def _matricize(self, positions: list[int]) -> np.ndarray:
        k = len(positions)
        return np.moveaxis(self._psi, positions, list(range(k))).reshape(2**k, -1)


def _second_singular_value(m: np.ndarray) -> float:
    if min(m.shape) < 2:
        return 0.0
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[1])
