"""Three-party ring key-agreement protocol: types and per-party operations.

Each of the three participants A, B, C owns n entangled pairs; the
travelling half of each pair walks the ring (owner -> successor ->
successor^2 -> owner), picking up an X encoding wherever the holder's
key/mask bit is 1.  Every hop is dressed with decoy pairs and hidden
behind a secret permutation, revealed only after the receiver's
acknowledgment.  The session orchestrator lives in ``session.py``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .bits import BitString
from .quantum import BellKind, ParticleRef, QuantumRegistry, Pauli, Slot


class ConfigError(ValueError):
    """Invalid session configuration."""


class ProtocolError(RuntimeError):
    """A protocol-level contract was violated (caller bug, not an abort)."""


class PartyId(enum.Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def successor(self) -> "PartyId":
        return {PartyId.A: PartyId.B, PartyId.B: PartyId.C, PartyId.C: PartyId.A}[self]

    @property
    def predecessor(self) -> "PartyId":
        return self.successor.successor

    def others(self) -> tuple["PartyId", "PartyId"]:
        return self.successor, self.successor.successor


@dataclass(frozen=True)
class Permutation:
    """Bijection on positions; ``forward[i]`` is where element i lands."""

    forward: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.forward) != list(range(len(self.forward))):
            raise ValueError("not a permutation")

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls(tuple(range(size)))

    @classmethod
    def random(cls, rng: np.random.Generator, size: int) -> "Permutation":
        return cls(tuple(int(i) for i in rng.permutation(size)))

    def apply(self, items: list) -> list:
        out = [None] * len(items)
        for i, item in enumerate(items):
            out[self.forward[i]] = item
        return out

    def invert(self, items: list) -> list:
        return [items[self.forward[i]] for i in range(len(items))]


@dataclass(frozen=True)
class DecoyRecord:
    """Sender-side knowledge revealed for a check: where the decoys sit.

    Positions are post-permutation; each inner tuple is the two halves of
    one decoy pair, expected to Bell-measure as Phi+.
    """

    decoy_pairs: tuple[tuple[int, int], ...]

    def positions(self) -> set[int]:
        return {p for pair in self.decoy_pairs for p in pair}


@dataclass
class SequencePacket:
    """A dressed, permuted sequence in transit on one quantum hop."""

    particles: list[ParticleRef]
    origin: PartyId
    round: int
    hop: tuple[PartyId, PartyId]


@dataclass
class PartyState:
    id: PartyId
    n: int
    p_home: list[ParticleRef]
    q_home: list[ParticleRef]
    K: BitString
    R: BitString
    # round -> (permutation, decoy record) for the packet this party sent
    sent: dict[int, tuple[Permutation, DecoyRecord]] = field(default_factory=dict)
    # the round-2 packet held until the final permutation reveal
    pending_packet: Optional[SequencePacket] = None
    announced_r: dict[PartyId, BitString] = field(default_factory=dict)
    M: Optional[BitString] = None
    final_key: Optional[BitString] = None
    phase_anomalies: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class Event:
    seq: int
    step: int
    actor: str
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "step": self.step,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
        }


class Transcript:
    """Append-only, strictly ordered log of every event in a session."""

    def __init__(self) -> None:
        self.events: list[Event] = []
        self.aborted = False

    def log(self, step: int, actor: str, kind: str, **payload: Any) -> Event:
        if self.aborted:
            raise ProtocolError("transcript is terminal after abort")
        event = Event(len(self.events), step, actor, kind, payload)
        self.events.append(event)
        if kind == "abort":
            self.aborted = True
        return event

    def kinds(self) -> list[str]:
        return [e.kind for e in self.events]

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)


DEFAULT_ANNOUNCE_ORDER: tuple[str, ...] = (
    "R_B",
    "R_A",
    "R_C",
    "PI_A",
    "PI_B",
    "PI_C",
)

_R_TOKENS = {"R_A", "R_B", "R_C"}
_PI_TOKENS = {"PI_A", "PI_B", "PI_C"}


def parse_announce_order(order: tuple[str, ...]) -> list[list[str]]:
    """Split an announce schedule into batches; '+' joins simultaneous reveals.

    Every R and PI token must appear exactly once across the schedule.
    """
    batches: list[list[str]] = []
    seen: list[str] = []
    for entry in order:
        batch = [tok.strip() for tok in entry.split("+")]
        for tok in batch:
            if tok not in _R_TOKENS | _PI_TOKENS:
                raise ConfigError(f"unknown announce token {tok!r}")
        batches.append(batch)
        seen.extend(batch)
    if sorted(seen) != sorted(_R_TOKENS | _PI_TOKENS):
        raise ConfigError(
            f"announce order must contain each of {sorted(_R_TOKENS | _PI_TOKENS)} "
            f"exactly once, got {seen}"
        )
    return batches


@dataclass
class SessionConfig:
    n: int
    seed: int = 0
    decoy_pairs_per_hop: Optional[int] = None  # defaults to n // 2
    error_tolerance: float = 0.0
    announce_order: tuple[str, ...] = DEFAULT_ANNOUNCE_ORDER
    adversary: Optional[Any] = None  # AdversaryConfig; None means honest
    # PartyId -> (K, R) as 01-strings; bypasses the RNG for those parties
    forced_secrets: Optional[dict[PartyId, tuple[str, str]]] = None

    def validate(self) -> None:
        if self.n <= 0 or self.n % 2 != 0:
            raise ConfigError(f"n must be a positive even integer, got {self.n}")
        if self.decoys_per_hop < 1:
            raise ConfigError("decoy_pairs_per_hop must be >= 1")
        if not 0.0 <= self.error_tolerance <= 1.0:
            raise ConfigError("error_tolerance must be in [0, 1]")
        parse_announce_order(self.announce_order)
        if self.forced_secrets is not None:
            for pid, (k, r) in self.forced_secrets.items():
                if len(k) != self.n or len(r) != self.n:
                    raise ConfigError(
                        f"forced secrets for {pid.value} must have length {self.n}"
                    )

    @property
    def decoys_per_hop(self) -> int:
        return self.decoy_pairs_per_hop if self.decoy_pairs_per_hop is not None else self.n // 2

    def to_dict(self) -> dict[str, Any]:
        adv = self.adversary.to_dict() if self.adversary is not None else {"kind": "none"}
        forced = None
        if self.forced_secrets is not None:
            forced = {
                pid.value: {"K": k, "R": r}
                for pid, (k, r) in sorted(self.forced_secrets.items(), key=lambda kv: kv[0].value)
            }
        return {
            "n": self.n,
            "seed": self.seed,
            "decoy_pairs_per_hop": self.decoys_per_hop,
            "error_tolerance": self.error_tolerance,
            "announce_order": list(self.announce_order),
            "adversary": adv,
            "forced_secrets": forced,
        }


def init_party(
    registry: QuantumRegistry,
    config: SessionConfig,
    pid: PartyId,
    transcript: Transcript,
) -> PartyState:
    """Step 1 for one party: n Phi+ pairs plus fresh secrets K and R."""
    if config.n % 2 != 0:
        raise ConfigError("n must be even")
    p_home: list[ParticleRef] = []
    q_home: list[ParticleRef] = []
    for _ in range(config.n):
        first, second = registry.new_bell_pair(BellKind.PHI_PLUS)
        p_home.append(first)
        q_home.append(second)
    forced = (config.forced_secrets or {}).get(pid)
    if forced is not None:
        key = BitString.from_string(forced[0])
        mask = BitString.from_string(forced[1])
    else:
        key = BitString.random(registry.rng, config.n)
        mask = BitString.random(registry.rng, config.n)
    transcript.log(1, pid.value, "prepare", n=config.n, forced=forced is not None)
    return PartyState(pid, config.n, p_home, q_home, key, mask)


def dress_sequence(
    registry: QuantumRegistry,
    party: PartyState,
    q: list[ParticleRef],
    round: int,
    decoy_pairs: int,
) -> SequencePacket:
    """Append fresh Phi+ decoy pairs and hide everything behind a random
    permutation; the permutation and decoy positions stay with the sender."""
    items = list(q)
    decoy_indices: list[tuple[int, int]] = []
    for _ in range(decoy_pairs):
        first, second = registry.new_bell_pair(BellKind.PHI_PLUS)
        decoy_indices.append((len(items), len(items) + 1))
        items.extend((first, second))
    perm = Permutation.random(registry.rng, len(items))
    record = DecoyRecord(
        tuple((perm.forward[i], perm.forward[j]) for i, j in decoy_indices)
    )
    party.sent[round] = (perm, record)
    return SequencePacket(perm.apply(items), party.id, round, (party.id, party.id.successor))


def check_decoys(
    registry: QuantumRegistry,
    packet: SequencePacket,
    record: DecoyRecord,
) -> tuple[int, int]:
    """Bell-measure every decoy pair in the packet; returns (failures, total).

    A decoy fails when its measurement is anything but Phi+.
    """
    failures = 0
    for pos_a, pos_b in record.decoy_pairs:
        outcome = registry.bell_measure(packet.particles[pos_a], packet.particles[pos_b])
        if outcome is not BellKind.PHI_PLUS:
            failures += 1
    return failures, len(record.decoy_pairs)


def restore_order(packet: SequencePacket, perm: Permutation, n: int) -> list[ParticleRef]:
    """Undo the sender's permutation and drop decoy positions, recovering the
    message sequence in its original order."""
    return perm.invert(packet.particles)[:n]


def eavesdrop_check(
    registry: QuantumRegistry,
    packet: SequencePacket,
    perm: Permutation,
    record: DecoyRecord,
    tolerance: float,
) -> tuple[bool, int, int, list[ParticleRef]]:
    """Full receiver-side check: measure decoys, compare the failure fraction
    against the tolerance, and (on pass) restore the message order.

    Returns (passed, failures, total, message_particles).
    """
    failures, total = check_decoys(registry, packet, record)
    if total > 0 and failures / total > tolerance:
        return False, failures, total, []
    n = len(packet.particles) - 2 * total
    return True, failures, total, restore_order(packet, perm, n)


def encode_ops(registry: QuantumRegistry, party: PartyState, particles: list[ParticleRef]) -> BitString:
    """Apply X to particle i iff K[i] ^ R[i] = 1; returns the operation string."""
    ops = party.K ^ party.R
    if len(particles) != len(ops):
        raise ProtocolError(
            f"encode length mismatch: {len(particles)} particles, {len(ops)} bits"
        )
    for particle, bit in zip(particles, ops):
        if bit:
            registry.apply_pauli(particle, Pauli.X)
    return ops


def derive_key(
    registry: QuantumRegistry,
    party: PartyState,
    q: list[ParticleRef],
    transcript: Transcript,
) -> BitString:
    """Step 8 for one party: Bell-measure the home pairs against the returned
    sequence and unmask with the two announced R values.

    Phi-/Psi- outcomes contribute their bit-flip component and are flagged as
    phase anomalies; they never abort.
    """
    other1, other2 = party.id.others()
    if other1 not in party.announced_r or other2 not in party.announced_r:
        raise ProtocolError(f"{party.id.value} is missing announced R values")
    bits: list[int] = []
    for i, (home, returned) in enumerate(zip(party.p_home, q)):
        outcome = registry.bell_measure(home, returned)
        bits.append(outcome.bit_flip_component)
        if outcome in (BellKind.PHI_MINUS, BellKind.PSI_MINUS):
            party.phase_anomalies.append(i)
            transcript.log(
                8, party.id.value, "measure",
                index=i, outcome=outcome.value, phase_anomaly=True,
            )
    party.M = BitString(tuple(bits))
    transcript.log(
        8, party.id.value, "measure",
        m=str(party.M), phase_anomalies=list(party.phase_anomalies),
    )
    key = party.M ^ party.announced_r[other1] ^ party.announced_r[other2] ^ party.K
    party.final_key = key
    transcript.log(8, party.id.value, "derive-key", key=str(key))
    return key
