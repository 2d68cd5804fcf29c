"""Acceptance suite: one test per exit criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
report.
"""

import dataclasses
import json
import time

import numpy as np

from qka_sim.adversary import AdversaryConfig
from qka_sim.bits import BitString
from qka_sim.cli import main
from qka_sim.protocol import PartyId, SessionConfig
from qka_sim.quantum import BELL_VECTORS, BellKind, NORM_TOL, Pauli, QuantumRegistry
from qka_sim.session import derive_trial_seed, run_session

SEC3_SECRETS = {
    PartyId.A: ("11", "00"),
    PartyId.B: ("10", "01"),
    PartyId.C: ("00", "11"),
}

EVE = AdversaryConfig(
    kind="external_intercept_resend", hop=(PartyId.A, PartyId.B), round=0, fraction=1.0
)


def _report(num, text):
    print(f"\n[acceptance] criterion {num}: PASS - {text}")


def test_criterion_1_worked_example_bit_exact(capsys):
    start = time.time()
    config = SessionConfig(
        n=2,
        seed=0,
        adversary=AdversaryConfig(kind="collusion", mode="absolute", target_key="11"),
        forced_secrets=dict(SEC3_SECRETS),
    )
    result = run_session(config)
    state = result.collusion
    assert str(state.learned_kb_xor_rb) == "11"
    assert str(state.learned_kb) == "10"
    assert str(state.honest_key) == "01"
    assert str(state.forged_r) == "01"
    assert str(result.parties[PartyId.B].M) == "00"
    assert str(result.keys[PartyId.B]) == "11"
    assert result.transcript.count("abort") == 0
    assert main(["attack-demo"]) == 0
    elapsed = time.time() - start
    assert elapsed < 1.0
    capsys.readouterr()
    _report(1, f"all six intermediates match, attack-demo exit 0, {elapsed:.2f}s")


def test_criterion_2_honest_correctness():
    start = time.time()
    for n in (2, 4, 8, 16, 32, 64):
        for trial in range(100):
            result = run_session(
                SessionConfig(n=n, seed=derive_trial_seed(2000 + n, trial))
            )
            assert result.status == "ok"
            expected = (
                result.parties[PartyId.A].K
                ^ result.parties[PartyId.B].K
                ^ result.parties[PartyId.C].K
            )
            assert all(result.keys[pid] == expected for pid in PartyId)
            assert result.decoy_failure_stats()[0] == 0
    elapsed = time.time() - start
    assert elapsed < 10.0
    _report(2, f"600 honest sessions agreed with zero failures in {elapsed:.1f}s")


def test_criterion_3_collusion_manipulation_success():
    trials = 1000
    for trial in range(trials):
        seed = derive_trial_seed(3000, trial)
        target = str(BitString.random(np.random.default_rng(seed), 8))
        adv = AdversaryConfig(kind="collusion", mode="absolute", target_key=target)
        result = run_session(SessionConfig(n=8, seed=seed, adversary=adv))
        assert result.status == "ok"
        assert str(result.keys[PartyId.B]) == target
        assert result.collusion.learned_kb == result.parties[PartyId.B].K
        assert result.transcript.count("abort") == 0
        assert result.decoy_failure_stats()[0] == 0

    offset = "01101001"
    adv = AdversaryConfig(kind="collusion", mode="delta", key_offset=offset)
    for trial in range(trials):
        seed = derive_trial_seed(3500, trial)
        result = run_session(SessionConfig(n=8, seed=seed, adversary=adv))
        honest = (
            result.parties[PartyId.A].K
            ^ result.parties[PartyId.B].K
            ^ result.parties[PartyId.C].K
        )
        assert str(result.keys[PartyId.B] ^ honest) == offset
        assert result.status == "ok"
    _report(3, "absolute 1000/1000 on target, K_B 1000/1000, delta 1000/1000 on offset")


def test_criterion_4_attack_invisibility():
    for trial in range(100):
        seed = derive_trial_seed(4000, trial)
        rng = np.random.default_rng(seed)
        forced = {
            pid: (str(BitString.random(rng, 8)), str(BitString.random(rng, 8)))
            for pid in PartyId
        }
        honest = run_session(SessionConfig(n=8, seed=seed, forced_secrets=forced))
        adv = AdversaryConfig(
            kind="collusion", mode="absolute", target_key=str(BitString.random(rng, 8))
        )
        attacked = run_session(
            SessionConfig(n=8, seed=seed, forced_secrets=forced, adversary=adv)
        )
        assert honest.parties[PartyId.A].M == attacked.parties[PartyId.A].M
    _report(4, "M_A identical in 100/100 attack-on/attack-off seed pairs")


def test_criterion_5_eavesdropper_detection_statistics():
    start = time.time()

    # per-decoy-pair failure frequency over 10^4 tampered pairs
    reg = QuantumRegistry(np.random.default_rng(500))
    pairs = 10_000
    failures = 0
    for _ in range(pairs):
        a, b = reg.new_bell_pair(BellKind.PHI_PLUS)
        reg.measure_z(a)
        reg.measure_z(b)
        if reg.bell_measure(a, b) is not BellKind.PHI_PLUS:
            failures += 1
    pair_rate = failures / pairs
    oracle_pair = 0.5  # analytic oracle for the collapsed state below
    check = QuantumRegistry(np.random.default_rng(501))
    a, b = check.new_bell_pair(BellKind.PHI_PLUS)
    check.measure_z(a)
    check.measure_z(b)
    probs = check.outcome_distribution(a.pair_id, "bell")
    assert abs((1.0 - probs[0]) - oracle_pair) < NORM_TOL
    assert abs(pair_rate - oracle_pair) < 0.015
    assert abs(pair_rate - oracle_pair) < 3 * np.sqrt(0.25 / pairs)

    # session abort rate for n=4 (two decoy pairs on the tampered hop)
    trials = 10_000
    aborts = 0
    for trial in range(trials):
        cfg = SessionConfig(n=4, seed=derive_trial_seed(5000, trial), adversary=EVE)
        if run_session(cfg).status == "abort":
            aborts += 1
    abort_rate = aborts / trials
    oracle_abort = 1.0 - (1.0 - oracle_pair) ** 2
    assert abs(abort_rate - oracle_abort) < 0.02
    assert abs(abort_rate - oracle_abort) < 3 * np.sqrt(
        oracle_abort * (1 - oracle_abort) / trials
    )
    elapsed = time.time() - start
    assert elapsed < 30.0
    _report(
        5,
        f"pair failure {pair_rate:.4f} (oracle 0.5), abort {abort_rate:.4f} "
        f"(oracle 0.75), {elapsed:.1f}s",
    )


def test_criterion_6_quantum_core_algebra():
    rng = np.random.default_rng(600)
    reg = QuantumRegistry(np.random.default_rng(601))
    kinds = list(BellKind)
    paulis = list(Pauli)

    # normalization across 10^3 random operation chains
    for _ in range(1000):
        a, b = reg.new_bell_pair(kinds[rng.integers(4)])
        for _ in range(rng.integers(1, 10)):
            pick = rng.integers(3)
            particle = a if rng.integers(2) == 0 else b
            if pick == 0:
                reg.apply_pauli(particle, paulis[rng.integers(4)])
            elif pick == 1:
                reg.bell_measure(a, b)
            else:
                reg.measure_z(particle)
        assert abs(reg._state(a.pair_id).norm_sq() - 1.0) < NORM_TOL

    # Pauli involution on the outcome distribution
    for pauli in (Pauli.I, Pauli.X, Pauli.Z):
        for _ in range(20):
            a, b = reg.new_bell_pair(kinds[rng.integers(4)])
            particle = a if rng.integers(2) == 0 else b
            before = reg.outcome_distribution(a.pair_id, "bell")
            reg.apply_pauli(particle, pauli)
            reg.apply_pauli(particle, pauli)
            np.testing.assert_allclose(
                reg.outcome_distribution(a.pair_id, "bell"), before, atol=NORM_TOL
            )

    # Bell-measurement repeatability over 10^4 trials
    for _ in range(10_000):
        a, b = reg.new_bell_pair(BellKind.PHI_PLUS)
        reg.measure_z(a)
        assert reg.bell_measure(a, b) is reg.bell_measure(a, b)

    # X-conjugation table on canonical states
    table = {
        BellKind.PHI_PLUS: BellKind.PSI_PLUS,
        BellKind.PSI_PLUS: BellKind.PHI_PLUS,
        BellKind.PHI_MINUS: BellKind.PSI_MINUS,
        BellKind.PSI_MINUS: BellKind.PHI_MINUS,
    }
    for before, after in table.items():
        a, b = reg.new_bell_pair(before)
        reg.apply_pauli(b, Pauli.X)
        assert reg.bell_measure(a, b) is after

    # Z-correlation laws for all four Bell states
    for kind, agree in [
        (BellKind.PHI_PLUS, True),
        (BellKind.PHI_MINUS, True),
        (BellKind.PSI_PLUS, False),
        (BellKind.PSI_MINUS, False),
    ]:
        for _ in range(200):
            a, b = reg.new_bell_pair(kind)
            assert (reg.measure_z(a) == reg.measure_z(b)) is agree

    _report(6, "normalization, involution, repeatability, conjugation, correlations")


def test_criterion_7_byte_identical_outputs(tmp_path, capsys):
    commands = [
        ["run", "--n", "8", "--seed", "42"],
        ["attack-demo", "--target", "00"],
        ["montecarlo", "--trials", "30", "--n", "4", "--seed", "42",
         "--adversary", "eve"],
        ["montecarlo", "--trials", "30", "--n", "8", "--seed", "42",
         "--adversary", "collusion", "--format", "json"],
    ]
    for argv in commands:
        outputs = []
        for _ in range(2):
            code = main(list(argv))
            outputs.append(capsys.readouterr().out)
            assert code == 0
        assert outputs[0] == outputs[1], f"non-deterministic output for {argv}"
    _report(7, "repeated invocations byte-identical for run/attack-demo/montecarlo")
