"""Seedable simulator of a three-party Bell-state quantum key agreement
protocol, with an adversary framework for the Alice-Charlie collusion attack
and external intercept-resend eavesdropping."""

from .adversary import AdversaryConfig, AttackInfeasibleError, CollusionState
from .bits import BitString
from .protocol import (
    ConfigError,
    PartyId,
    Permutation,
    SessionConfig,
    Transcript,
)
from .quantum import BellKind, Pauli, ParticleRef, QuantumRegistry, Slot
from .session import SessionResult, derive_trial_seed, run_session

__all__ = [
    "AdversaryConfig",
    "AttackInfeasibleError",
    "BellKind",
    "BitString",
    "CollusionState",
    "ConfigError",
    "PartyId",
    "ParticleRef",
    "Pauli",
    "Permutation",
    "QuantumRegistry",
    "SessionConfig",
    "SessionResult",
    "Slot",
    "Transcript",
    "derive_trial_seed",
    "run_session",
]
