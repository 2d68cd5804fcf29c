"""Session orchestration: drives the eight protocol steps across the ring,
invokes adversary hooks at their interception points, and serializes the
result.

One session = one registry = one RNG stream, run strictly sequentially, so
identical (seed, config) replays to a byte-identical transcript.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .adversary import (
    AdversaryConfig,
    CollusionState,
    collusion_early_measure,
    forge_r,
    intercept_resend,
    predict_victim_key,
    recover_kb,
)
from .bits import BitString
from .protocol import (
    PartyId,
    PartyState,
    SequencePacket,
    SessionConfig,
    Transcript,
    check_decoys,
    derive_key,
    dress_sequence,
    encode_ops,
    init_party,
    parse_announce_order,
    restore_order,
)
from .quantum import QuantumRegistry

_PARTIES = (PartyId.A, PartyId.B, PartyId.C)


@dataclass
class SessionResult:
    status: str  # "ok" | "abort"
    config: SessionConfig
    transcript: Transcript
    keys: Optional[dict[PartyId, BitString]] = None
    abort_hop: Optional[str] = None
    parties: dict[PartyId, PartyState] = field(default_factory=dict)
    collusion: Optional[CollusionState] = None

    @property
    def agreed(self) -> bool:
        return self.status == "ok" and len({str(k) for k in self.keys.values()}) == 1

    def decoy_failure_stats(self) -> tuple[int, int]:
        """(failed decoy pairs, checked decoy pairs) across the whole session."""
        failed = checked = 0
        for event in self.transcript.events:
            if event.kind == "decoy-check":
                failed += event.payload["failures"]
                checked += event.payload["total"]
        return failed, checked

    def to_json_dict(self) -> dict[str, Any]:
        outcome: dict[str, Any] = {"status": self.status}
        if self.status == "ok":
            outcome["keys"] = {pid.value: str(key) for pid, key in self.keys.items()}
        else:
            outcome["abort_hop"] = self.abort_hop
        return {
            "config": self.config.to_dict(),
            "events": [e.to_dict() for e in self.transcript.events],
            "outcome": outcome,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def derive_trial_seed(base_seed: int, trial: int) -> int:
    """Per-trial seed: a documented mixing of (base seed, trial index) through
    numpy's SeedSequence hash, so trials look independent yet replay exactly."""
    return int(np.random.SeedSequence([base_seed, trial]).generate_state(1)[0])


def _hop_name(sender: PartyId, receiver: PartyId) -> str:
    return f"{sender.value}->{receiver.value}"


def run_session(config: SessionConfig) -> SessionResult:
    """Execute one full protocol session (Steps 1-8) under the configured
    adversary; returns per-party keys or the abort, plus the transcript."""
    config.validate()
    adversary = config.adversary if config.adversary is not None else AdversaryConfig()
    adversary.validate(config.n)

    registry = QuantumRegistry(np.random.default_rng(config.seed))
    transcript = Transcript()
    parties = {pid: init_party(registry, config, pid, transcript) for pid in _PARTIES}

    collusion = CollusionState() if adversary.kind == "collusion" else None

    # Travelling sequence of each owner: current holder and particle list.
    held: dict[PartyId, list] = {pid: list(parties[pid].q_home) for pid in _PARTIES}
    holder: dict[PartyId, PartyId] = {pid: pid for pid in _PARTIES}

    for rnd in range(3):
        step_send = 2 + 2 * rnd
        step_check = 3 + 2 * rnd

        packets: dict[PartyId, SequencePacket] = {}
        for owner in _PARTIES:
            sender = holder[owner]
            if rnd > 0:
                if rnd == 2 and collusion is not None and owner is PartyId.A:
                    _run_early_measure(registry, transcript, parties, held, collusion)
                ops = encode_ops(registry, parties[sender], held[owner])
                transcript.log(
                    step_send, sender.value, "encode",
                    sequence_owner=owner.value, ops=str(ops),
                )
            packet = dress_sequence(
                registry, parties[sender], held[owner], rnd, config.decoys_per_hop
            )
            packet.hop = (sender, sender.successor)
            packets[owner] = packet
            transcript.log(
                step_send, sender.value, "dress",
                sequence_owner=owner.value, round=rnd, length=len(packet.particles),
            )

        for owner in _PARTIES:
            packet = packets[owner]
            sender, receiver = packet.hop
            transcript.log(
                step_send, sender.value, "quantum-send",
                sequence_owner=owner.value, hop=_hop_name(sender, receiver), round=rnd,
            )
            if (
                adversary.kind == "external_intercept_resend"
                and adversary.round == rnd
                and adversary.hop == (sender, receiver)
            ):
                guesses = intercept_resend(registry, packet.particles, adversary.fraction)
                transcript.log(
                    step_send, "Eve", "side-channel",
                    action="intercept-resend", hop=_hop_name(sender, receiver),
                    measured=[[pos, bit] for pos, bit in guesses],
                )
            transcript.log(
                step_send, receiver.value, "ack",
                hop=_hop_name(sender, receiver), round=rnd,
            )

        for owner in _PARTIES:
            packet = packets[owner]
            sender, receiver = packet.hop
            perm, record = parties[sender].sent[rnd]
            if rnd < 2:
                transcript.log(
                    step_check, sender.value, "permutation-reveal",
                    round=rnd, permutation=list(perm.forward),
                    decoy_pairs=[list(p) for p in record.decoy_pairs],
                )
            else:
                # Round 2: only the decoy layout is revealed now; the message
                # ordering stays hidden until Step 8.
                transcript.log(
                    step_check, sender.value, "permutation-reveal",
                    round=rnd, permutation=None,
                    decoy_pairs=[list(p) for p in record.decoy_pairs],
                )
            failures, total = check_decoys(registry, packet, record)
            transcript.log(
                step_check, receiver.value, "decoy-check",
                hop=_hop_name(sender, receiver), round=rnd,
                failures=failures, total=total,
            )
            if total > 0 and failures / total > config.error_tolerance:
                transcript.log(
                    step_check, receiver.value, "abort",
                    hop=_hop_name(sender, receiver), round=rnd,
                    failures=failures, total=total,
                )
                return SessionResult(
                    status="abort",
                    config=config,
                    transcript=transcript,
                    abort_hop=_hop_name(sender, receiver),
                    parties=parties,
                    collusion=collusion,
                )
            holder[owner] = receiver
            if rnd < 2:
                held[owner] = restore_order(packet, perm, config.n)
            else:
                parties[receiver].pending_packet = packet

    _announcement_phase(registry, transcript, parties, held, config, adversary, collusion)

    keys = {pid: derive_key(registry, parties[pid], held[pid], transcript) for pid in _PARTIES}

    if collusion is not None and collusion.learned_kb is not None:
        own_keys = parties[PartyId.A].K ^ parties[PartyId.C].K
        predict_victim_key(collusion, own_keys)

    return SessionResult(
        status="ok",
        config=config,
        transcript=transcript,
        keys=keys,
        parties=parties,
        collusion=collusion,
    )


def _run_early_measure(
    registry: QuantumRegistry,
    transcript: Transcript,
    parties: dict[PartyId, PartyState],
    held: dict[PartyId, list],
    collusion: CollusionState,
) -> None:
    """The colluders' quantum side step: before Charlie's own encoding, Bob's
    encoded sequence detours to Alice, who Bell-measures it in place.

    The very same particles then rejoin the official flow, so every later
    event looks exactly like an honest run."""
    transcript.log(
        6, PartyId.C.value, "side-channel",
        action="pass-sequence", to=PartyId.A.value, sequence_owner=PartyId.A.value,
    )
    learned = collusion_early_measure(registry, parties[PartyId.A].p_home, held[PartyId.A])
    collusion.learned_kb_xor_rb = learned
    transcript.log(
        6, PartyId.A.value, "side-channel",
        action="early-bell-measure", learned_kb_xor_rb=str(learned),
    )
    transcript.log(
        6, PartyId.A.value, "side-channel",
        action="return-sequence", to=PartyId.C.value, sequence_owner=PartyId.A.value,
    )


def _announcement_phase(
    registry: QuantumRegistry,
    transcript: Transcript,
    parties: dict[PartyId, PartyState],
    held: dict[PartyId, list],
    config: SessionConfig,
    adversary: AdversaryConfig,
    collusion: Optional[CollusionState],
) -> None:
    """Step 8 classical phase: R reveals and final permutation reveals in the
    configured batch order.  Reveals inside one batch are atomic: forgeries
    decided in a batch cannot use values revealed by that same batch."""
    batches = parse_announce_order(config.announce_order)
    for batch in batches:
        announced: list[tuple[str, PartyId, Any]] = []
        for token in batch:
            kind, pid = token.split("_")
            pid = PartyId(pid)
            if kind == "R":
                value = parties[pid].R
                if (
                    collusion is not None
                    and pid is adversary.forge_party
                ):
                    own_keys = parties[PartyId.A].K ^ parties[PartyId.C].K
                    value = forge_r(collusion, adversary, parties[pid].R, own_keys)
                    transcript.log(
                        8, pid.value, "side-channel",
                        action="forge-r", true_r=str(parties[pid].R), announced=str(value),
                    )
                announced.append(("R", pid, value))
            else:
                announced.append(("PI", pid, None))
        for kind, pid, value in announced:
            if kind == "R":
                transcript.log(8, pid.value, "R-reveal", value=str(value))
                for other in _PARTIES:
                    if other is not pid:
                        parties[other].announced_r[pid] = value
                if (
                    collusion is not None
                    and pid is PartyId.B
                    and collusion.learned_kb_xor_rb is not None
                    and collusion.learned_kb is None
                ):
                    collusion.learned_kb = recover_kb(collusion.learned_kb_xor_rb, value)
                    transcript.log(
                        8, PartyId.A.value, "side-channel",
                        action="recover-kb", kb=str(collusion.learned_kb),
                    )
            else:
                perm, record = parties[pid].sent[2]
                transcript.log(
                    8, pid.value, "final-permutation-reveal",
                    permutation=list(perm.forward),
                )
                owner = pid.successor  # round-2 hop pid -> succ(pid) returned succ's q
                packet = parties[owner].pending_packet
                held[owner] = restore_order(packet, perm, config.n)
                parties[owner].pending_packet = None
