"""Exact simulation of independent two-qubit entangled pairs.

Each pair lives in its own 4-dimensional state vector (basis order
|00>, |01>, |10>, |11>).  Pairs never couple, so a registry of n pairs
costs O(n) memory and every operation is a 4x4 matrix-vector product.
States are compared up to global phase; measurement collapse draws from
a single seedable stream owned by the registry, in operation order, so
identical seed + identical operation sequence replays bit-exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-12

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class Slot(enum.Enum):
    """Which particle of a pair: FIRST stays home, SECOND travels."""

    FIRST = "first"
    SECOND = "second"


class BellKind(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def bit_flip_component(self) -> int:
        """0 for the Phi states, 1 for the Psi states."""
        return 0 if self in (BellKind.PHI_PLUS, BellKind.PHI_MINUS) else 1


#: Fixed ordering used by bell-basis probability vectors.
BELL_ORDER: tuple[BellKind, ...] = (
    BellKind.PHI_PLUS,
    BellKind.PHI_MINUS,
    BellKind.PSI_PLUS,
    BellKind.PSI_MINUS,
)

BELL_VECTORS: dict[BellKind, np.ndarray] = {
    BellKind.PHI_PLUS: np.array([1, 0, 0, 1], dtype=complex) * _INV_SQRT2,
    BellKind.PHI_MINUS: np.array([1, 0, 0, -1], dtype=complex) * _INV_SQRT2,
    BellKind.PSI_PLUS: np.array([0, 1, 1, 0], dtype=complex) * _INV_SQRT2,
    BellKind.PSI_MINUS: np.array([0, 1, -1, 0], dtype=complex) * _INV_SQRT2,
}

# Rows are the bell vectors in BELL_ORDER; <bell_k|psi> = _BELL_BASIS.conj() @ psi.
_BELL_BASIS = np.array([BELL_VECTORS[k] for k in BELL_ORDER])


class Pauli(enum.Enum):
    I = "I"
    X = "X"
    Z = "Z"
    Y = "Y"


_PAULI_2x2: dict[Pauli, np.ndarray] = {
    Pauli.I: np.eye(2, dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
}

# Precomputed 4x4 operators: (P tensor I) for slot FIRST, (I tensor P) for SECOND.
_PAIR_OPERATORS: dict[tuple[Pauli, Slot], np.ndarray] = {}
for _p, _m in _PAULI_2x2.items():
    _PAIR_OPERATORS[(_p, Slot.FIRST)] = np.kron(_m, np.eye(2, dtype=complex))
    _PAIR_OPERATORS[(_p, Slot.SECOND)] = np.kron(np.eye(2, dtype=complex), _m)


class RegistryError(KeyError):
    """Raised when a particle or pair reference is unknown to the registry."""


class PairMismatchError(ValueError):
    """Raised when a two-particle operation is asked to span distinct pairs."""


@dataclass(frozen=True)
class ParticleRef:
    """Handle to one particle of a registered pair."""

    pair_id: int
    slot: Slot


@dataclass
class PairState:
    """State of one two-particle pair plus destructive-measurement flags."""

    amplitudes: np.ndarray
    collapsed: dict[Slot, bool] = field(
        default_factory=lambda: {Slot.FIRST: False, Slot.SECOND: False}
    )

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def states_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """True if a = c*b for some unit complex c."""
    overlap = np.vdot(b, a)
    return bool(abs(abs(overlap) - 1.0) < tol)


class QuantumRegistry:
    """Owner of all live pairs in one session and of the session RNG.

    Single-threaded by contract: one registry is never mutated
    concurrently, but distinct registries are fully independent.
    """

    def __init__(self, rng: np.random.Generator | int | None = None):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.rng = rng
        self._pairs: dict[int, PairState] = {}
        self._next_id = 0

    def new_bell_pair(self, kind: BellKind) -> tuple[ParticleRef, ParticleRef]:
        """Create a fresh pair in the canonical state of ``kind``."""
        pair_id = self._next_id
        self._next_id += 1
        self._pairs[pair_id] = PairState(BELL_VECTORS[kind].copy())
        return ParticleRef(pair_id, Slot.FIRST), ParticleRef(pair_id, Slot.SECOND)

    def _state(self, pair_id: int) -> PairState:
        try:
            return self._pairs[pair_id]
        except KeyError:
            raise RegistryError(f"unknown pair id {pair_id}") from None

    def state_vector(self, pair_id: int) -> np.ndarray:
        return self._state(pair_id).amplitudes.copy()

    def apply_pauli(self, particle: ParticleRef, op: Pauli) -> None:
        """Apply a single-particle Pauli to one slot of a pair."""
        state = self._state(particle.pair_id)
        state.amplitudes = _PAIR_OPERATORS[(op, particle.slot)] @ state.amplitudes

    def bell_measure(self, a: ParticleRef, b: ParticleRef) -> BellKind:
        """Projective Bell-basis measurement of one pair.

        ``a`` and ``b`` must be the two slots of the same pair; the state
        collapses to the canonical vector of the sampled outcome, so an
        immediate re-measurement repeats the outcome with probability 1.
        """
        if a.pair_id != b.pair_id:
            raise PairMismatchError(
                f"bell_measure spans pairs {a.pair_id} and {b.pair_id}"
            )
        if a.slot == b.slot:
            raise PairMismatchError("bell_measure needs both slots of the pair")
        state = self._state(a.pair_id)
        probs = np.abs(_BELL_BASIS.conj() @ state.amplitudes) ** 2
        idx = self._sample(probs)
        kind = BELL_ORDER[idx]
        state.amplitudes = BELL_VECTORS[kind].copy()
        return kind

    def measure_z(self, particle: ParticleRef) -> int:
        """Computational-basis measurement of one particle.

        Samples from the particle's marginal and collapses the pair by
        projection + renormalization.
        """
        state = self._state(particle.pair_id)
        amps = state.amplitudes
        # Slot FIRST: |0x> components at indices 0,1; slot SECOND: at 0,2.
        zero_idx = (0, 1) if particle.slot == Slot.FIRST else (0, 2)
        p0 = float(sum(abs(amps[i]) ** 2 for i in zero_idx))
        bit = 0 if self.rng.random() < p0 else 1
        projected = amps.copy()
        for i in range(4):
            keeps_zero = i in zero_idx
            if (bit == 0) != keeps_zero:
                projected[i] = 0.0
        norm = np.linalg.norm(projected)
        state.amplitudes = projected / norm
        state.collapsed[particle.slot] = True
        return bit

    def outcome_distribution(self, pair_id: int, basis: str) -> np.ndarray:
        """Exact outcome probabilities, with no sampling and no collapse.

        ``basis`` is "bell" (ordered per BELL_ORDER) or "computational"
        (ordered |00>,|01>,|10>,|11>).
        """
        amps = self._state(pair_id).amplitudes
        if basis == "bell":
            probs = np.abs(_BELL_BASIS.conj() @ amps) ** 2
        elif basis == "computational":
            probs = np.abs(amps) ** 2
        else:
            raise ValueError(f"unknown basis {basis!r}")
        return probs

    def _sample(self, probs: np.ndarray) -> int:
        u = self.rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return int(np.argmax(probs))
