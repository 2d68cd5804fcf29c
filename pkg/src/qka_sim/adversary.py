"""Adversary strategies plugged into a protocol session.

Two models are supported:

* an external intercept-resend eavesdropper who Z-measures transiting
  particles on one configured hop (exercises the decoy-check machinery);
* the Alice-Charlie collusion: Charlie routes Bob's encoded sequence to
  Alice over a side channel before his own encoding, Alice Bell-measures
  it against her home particles to learn K_B ^ R_B, and after Bob's R_B
  announcement the colluders recover K_B and forge a classical R
  announcement to steer Bob's derived key.  All quantum traffic on the
  official channels is untouched, so no decoy check can ever fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .bits import BitString
from .protocol import ConfigError, PartyId
from .quantum import QuantumRegistry, ParticleRef


class AttackInfeasibleError(RuntimeError):
    """The configured attack cannot run under the session's announcement
    schedule (e.g. an absolute-target forgery with no prior R_B reveal)."""


@dataclass(frozen=True)
class AdversaryConfig:
    """Session adversary settings; kind 'none' means an honest run."""

    kind: str = "none"  # none | external_intercept_resend | collusion
    # intercept-resend fields
    hop: Optional[tuple[PartyId, PartyId]] = None
    round: int = 0
    fraction: float = 1.0
    # collusion fields
    mode: str = "absolute"  # absolute | delta
    target_key: Optional[str] = None
    key_offset: Optional[str] = None
    forge_party: PartyId = PartyId.C  # which colluder's R announcement is forged

    def validate(self, n: int) -> None:
        if self.kind == "none":
            return
        if self.kind == "external_intercept_resend":
            if self.hop is None:
                raise ConfigError("intercept-resend adversary needs a hop")
            if self.hop[0].successor is not self.hop[1]:
                raise ConfigError(f"{self.hop} is not a ring hop")
            if self.round not in (0, 1, 2):
                raise ConfigError("round must be 0, 1 or 2")
            if not 0.0 <= self.fraction <= 1.0:
                raise ConfigError("fraction must be in [0, 1]")
        elif self.kind == "collusion":
            if self.forge_party not in (PartyId.A, PartyId.C):
                raise ConfigError("only the colluders A and C can forge")
            if self.mode == "absolute":
                if self.target_key is None or len(self.target_key) != n:
                    raise ConfigError(f"absolute mode needs a target_key of length {n}")
            elif self.mode == "delta":
                if self.key_offset is None or len(self.key_offset) != n:
                    raise ConfigError(f"delta mode needs a key_offset of length {n}")
            else:
                raise ConfigError(f"unknown collusion mode {self.mode!r}")
        else:
            raise ConfigError(f"unknown adversary kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "external_intercept_resend":
            return {
                "kind": "external_intercept_resend",
                "hop": f"{self.hop[0].value}->{self.hop[1].value}",
                "round": self.round,
                "fraction": self.fraction,
            }
        out: dict[str, Any] = {
            "kind": "collusion",
            "mode": self.mode,
            "forge_party": self.forge_party.value,
        }
        if self.mode == "absolute":
            out["target_key"] = self.target_key
        else:
            out["key_offset"] = self.key_offset
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AdversaryConfig":
        kind = data.get("kind", "none")
        if kind == "none":
            return cls()
        if kind == "external_intercept_resend":
            hop_text = data.get("hop", "A->B")
            try:
                src, dst = hop_text.split("->")
                hop = (PartyId(src.strip()), PartyId(dst.strip()))
            except (ValueError, KeyError):
                raise ConfigError(f"bad hop {hop_text!r}, expected e.g. 'A->B'") from None
            return cls(
                kind=kind,
                hop=hop,
                round=int(data.get("round", 0)),
                fraction=float(data.get("fraction", 1.0)),
            )
        if kind == "collusion":
            return cls(
                kind=kind,
                mode=data.get("mode", "absolute"),
                target_key=data.get("target_key"),
                key_offset=data.get("key_offset"),
                forge_party=PartyId(data.get("forge_party", "C")),
            )
        raise ConfigError(f"unknown adversary kind {kind!r}")


@dataclass
class CollusionState:
    """Everything the colluders accumulate during one session."""

    learned_kb_xor_rb: Optional[BitString] = None
    learned_kb: Optional[BitString] = None
    honest_key: Optional[BitString] = None
    forged_r: Optional[BitString] = None
    true_r: Optional[BitString] = None
    prediction: Optional[BitString] = None
    eve_bits: list[int] = field(default_factory=list)


def intercept_resend(
    registry: QuantumRegistry,
    particles: list[ParticleRef],
    fraction: float,
) -> list[tuple[int, int]]:
    """Z-measure a fraction of transiting particles and pass them on.

    The same particle objects continue down the channel (collapse only);
    returns Eve's (position, guessed bit) pairs.
    """
    guesses: list[tuple[int, int]] = []
    for pos, particle in enumerate(particles):
        if fraction >= 1.0 or registry.rng.random() < fraction:
            guesses.append((pos, registry.measure_z(particle)))
    return guesses


def collusion_early_measure(
    registry: QuantumRegistry,
    alice_home: list[ParticleRef],
    q_ab: list[ParticleRef],
) -> BitString:
    """Alice's side-channel Bell measurement of Bob's encoded sequence against
    her home particles; bit i is 1 exactly when Bob applied X at position i,
    so the result is K_B ^ R_B."""
    bits = tuple(
        registry.bell_measure(home, travelling).bit_flip_component
        for home, travelling in zip(alice_home, q_ab)
    )
    return BitString(bits)


def recover_kb(learned_kb_xor_rb: BitString, announced_rb: BitString) -> BitString:
    """Unmask Bob's private key once R_B is on the transcript."""
    return learned_kb_xor_rb ^ announced_rb


def forge_r(
    state: CollusionState,
    config: AdversaryConfig,
    true_r: BitString,
    own_keys: BitString,
) -> BitString:
    """The forged R announcement for the configured colluder.

    ``own_keys`` is K_A ^ K_C, which the colluders know directly.  In
    absolute mode the honest key (needs the recovered K_B) fixes the offset
    that turns it into the target; in delta mode the offset is given.
    """
    n = len(true_r)
    state.true_r = true_r
    if config.mode == "absolute":
        if state.learned_kb is None:
            raise AttackInfeasibleError(
                "absolute-target forgery needs R_B announced before the forged reveal"
            )
        state.honest_key = own_keys ^ state.learned_kb
        target = BitString.from_string(config.target_key)
        state.forged_r = true_r ^ state.honest_key ^ target
    else:
        if state.learned_kb is not None:
            state.honest_key = own_keys ^ state.learned_kb
        state.forged_r = true_r ^ BitString.from_string(config.key_offset)
    return state.forged_r


def predict_victim_key(state: CollusionState, own_keys: BitString) -> BitString:
    """The key Bob will derive given the forgery: the honest key shifted by
    the announced-vs-true R difference.  Equals the target in absolute mode."""
    if state.forged_r is None or state.true_r is None or state.learned_kb is None:
        raise AttackInfeasibleError("prediction needs the forgery and recovered K_B")
    state.prediction = own_keys ^ state.learned_kb ^ state.true_r ^ state.forged_r
    return state.prediction
