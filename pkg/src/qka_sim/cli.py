"""Command-line harness: single sessions, the canonical two-bit collusion
demonstration, and Monte Carlo experiment sweeps.

Exit codes: 0 success / key agreement, 1 invalid flags or config, 2 session
abort, 3 attack infeasible under the configured announcement schedule,
4 demo value mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
from typing import Any, Optional, TextIO

import numpy as np

from .adversary import AdversaryConfig, AttackInfeasibleError
from .bits import BitString
from .protocol import ConfigError, PartyId, SessionConfig, DEFAULT_ANNOUNCE_ORDER
from .session import derive_trial_seed, run_session

SEED_ENV_VAR = "QKA_SIM_SEED"

CSV_HEADER = "n,adversary,trials,aborts,abort_rate,attack_successes,agreement_rate,mean_decoy_failure_rate"

_ADVERSARY_PRESETS = {
    "none": {"kind": "none"},
    "eve": {"kind": "external_intercept_resend", "hop": "A->B", "round": 0, "fraction": 1.0},
    "collusion": {"kind": "collusion", "mode": "absolute"},
}


class _Parser(argparse.ArgumentParser):
    """argparse with the documented exit code (1) for usage errors."""

    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _parse_adversary(text: str) -> dict[str, Any]:
    if text in _ADVERSARY_PRESETS:
        return dict(_ADVERSARY_PRESETS[text])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--adversary is neither a preset {sorted(_ADVERSARY_PRESETS)} "
                          f"nor valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("--adversary JSON must be an object")
    return data


def _parse_forced_secrets(text: str, n: int) -> dict[PartyId, tuple[str, str]]:
    """JSON like {"A": ["11", "00"], "B": ["10", "01"], "C": ["00", "11"]}
    mapping each party to [K, R]."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--force-secrets is not valid JSON: {exc}") from None
    forced: dict[PartyId, tuple[str, str]] = {}
    try:
        for name, (k, r) in data.items():
            forced[PartyId(name)] = (str(k), str(r))
    except (ValueError, TypeError):
        raise ConfigError(
            '--force-secrets must map party names to [K, R] pairs, '
            'e.g. {"A": ["11", "00"]}'
        ) from None
    return forced


def _open_output(path: Optional[str]) -> TextIO:
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w")


def _build_config(args: argparse.Namespace) -> SessionConfig:
    adversary = AdversaryConfig.from_dict(_parse_adversary(args.adversary))
    forced = None
    if getattr(args, "force_secrets", None):
        forced = _parse_forced_secrets(args.force_secrets, args.n)
    announce = DEFAULT_ANNOUNCE_ORDER
    if getattr(args, "announce_order", None):
        announce = tuple(tok.strip() for tok in args.announce_order.split(","))
    config = SessionConfig(
        n=args.n,
        seed=args.seed,
        error_tolerance=args.tolerance,
        decoy_pairs_per_hop=args.decoy_pairs,
        announce_order=announce,
        adversary=adversary,
        forced_secrets=forced,
    )
    config.validate()
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = run_session(config)
    out = _open_output(args.output)
    try:
        out.write(result.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0 if result.status == "ok" else 2


# The canonical two-bit scenario: fixed secrets for all three parties and the
# manipulation target that flips the honest key 01 into 11.
DEMO_SECRETS = {
    PartyId.A: ("11", "00"),
    PartyId.B: ("10", "01"),
    PartyId.C: ("00", "11"),
}
DEMO_DEFAULT_TARGET = "11"


def _demo_expectations(target: BitString) -> dict[str, BitString]:
    k_a, r_a = (BitString.from_string(s) for s in DEMO_SECRETS[PartyId.A])
    k_b, r_b = (BitString.from_string(s) for s in DEMO_SECRETS[PartyId.B])
    k_c, r_c = (BitString.from_string(s) for s in DEMO_SECRETS[PartyId.C])
    honest = k_a ^ k_b ^ k_c
    forged_rc = r_c ^ honest ^ target
    return {
        "kb_xor_rb": k_b ^ r_b,
        "recovered_kb": k_b,
        "honest_key": honest,
        "forged_rc": forged_rc,
        "m_b": k_a ^ r_a ^ k_c ^ r_c,
        "bob_key": (k_a ^ r_a ^ k_c ^ r_c) ^ r_a ^ forged_rc ^ k_b,
    }


def cmd_attack_demo(args: argparse.Namespace) -> int:
    target = BitString.from_string(args.target)
    if len(target) != 2:
        raise ConfigError("--target must be a 2-bit string")
    config = SessionConfig(
        n=2,
        seed=args.seed,
        adversary=AdversaryConfig(kind="collusion", mode="absolute", target_key=str(target)),
        forced_secrets=dict(DEMO_SECRETS),
    )
    result = run_session(config)
    expected = _demo_expectations(target)
    state = result.collusion
    actual = {
        "kb_xor_rb": state.learned_kb_xor_rb,
        "recovered_kb": state.learned_kb,
        "honest_key": state.honest_key,
        "forged_rc": state.forged_r,
        "m_b": result.parties[PartyId.B].M,
        "bob_key": result.keys[PartyId.B],
    }
    labels = {
        "kb_xor_rb": "Bob's operation string K_B^R_B (early Bell measurement)",
        "recovered_kb": "recovered private key K_B",
        "honest_key": "honest final key K_A^K_B^K_C",
        "forged_rc": "forged announcement R'_C",
        "m_b": "Bob's measurement string M_B",
        "bob_key": "Bob's derived final key",
    }
    print(f"Three-party key agreement, n=2, colluders A and C, target key {target}")
    print("  secrets: K_A=11 R_A=00  K_B=10 R_B=01  K_C=00 R_C=11")
    first_mismatch = None
    for name, label in labels.items():
        ok = str(actual[name]) == str(expected[name])
        mark = "ok" if ok else f"MISMATCH (expected {expected[name]})"
        print(f"  {label}: {actual[name]}  [{mark}]")
        if not ok and first_mismatch is None:
            first_mismatch = name
    aborted = result.status != "ok"
    print(f"  session status: {result.status} "
          f"(decoy failures: {result.decoy_failure_stats()[0]})")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(result.to_json() + "\n")
    else:
        print(result.to_json())
    if aborted:
        print("demo failed: session aborted", file=sys.stderr)
        return 4
    if first_mismatch is not None:
        print(f"demo failed: first divergent quantity is {labels[first_mismatch]}",
              file=sys.stderr)
        return 4
    return 0


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _run_trials(
    base: SessionConfig, adversary: AdversaryConfig, trials: int, base_seed: int
) -> dict[str, Any]:
    aborts = 0
    attack_successes = 0
    agreements = 0
    failure_rates: list[float] = []
    random_target = adversary.kind == "collusion" and adversary.mode == "absolute" \
        and adversary.target_key is None
    for trial in range(trials):
        adv = adversary
        if random_target:
            target_rng = np.random.default_rng(
                np.random.SeedSequence([base_seed, trial, 1])
            )
            adv = dataclasses.replace(
                adversary, target_key=str(BitString.random(target_rng, base.n))
            )
        config = dataclasses.replace(
            base, seed=derive_trial_seed(base_seed, trial), adversary=adv
        )
        result = run_session(config)
        failed, checked = result.decoy_failure_stats()
        failure_rates.append(failed / checked if checked else 0.0)
        if result.status == "abort":
            aborts += 1
            continue
        if result.agreed:
            agreements += 1
        if adv.kind == "collusion" and result.collusion is not None:
            bob_key = result.keys[PartyId.B]
            if adv.mode == "absolute":
                if str(bob_key) == adv.target_key:
                    attack_successes += 1
            elif result.collusion.prediction is not None:
                if str(bob_key) == str(result.collusion.prediction):
                    attack_successes += 1
    return {
        "n": base.n,
        "adversary": adversary.kind if adversary.kind != "none" else "none",
        "trials": trials,
        "aborts": aborts,
        "abort_rate": aborts / trials,
        "attack_successes": attack_successes,
        "agreement_rate": agreements / trials,
        "mean_decoy_failure_rate": sum(failure_rates) / len(failure_rates),
    }


def cmd_montecarlo(args: argparse.Namespace) -> int:
    n_values = _parse_int_list(args.n)
    tolerances = _parse_float_list(args.tolerance)
    fractions = _parse_float_list(args.fraction) if args.fraction else [None]
    if args.trials < 1 or not n_values or not tolerances or not fractions:
        raise ConfigError("trials must be >= 1 and every sweep list non-empty")
    adversary = AdversaryConfig.from_dict(_parse_adversary(args.adversary))

    rows = []
    for n, tol, frac in itertools.product(n_values, tolerances, fractions):
        adv = adversary
        if frac is not None:
            if adversary.kind != "external_intercept_resend":
                raise ConfigError("--fraction only applies to the intercept-resend adversary")
            adv = dataclasses.replace(adversary, fraction=frac)
        base = SessionConfig(n=n, error_tolerance=tol, adversary=adv)
        rows.append(_run_trials(base, adv, args.trials, args.seed))

    out = _open_output(args.output)
    try:
        if args.format == "csv":
            out.write(CSV_HEADER + "\n")
            for row in rows:
                out.write(
                    f"{row['n']},{row['adversary']},{row['trials']},{row['aborts']},"
                    f"{row['abort_rate']:.6f},{row['attack_successes']},"
                    f"{row['agreement_rate']:.6f},{row['mean_decoy_failure_rate']:.6f}\n"
                )
        else:
            out.write(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="qka-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one protocol session and print its transcript")
    run.add_argument("--n", type=int, default=4, help="message length (even)")
    run.add_argument("--seed", type=int, default=_default_seed())
    run.add_argument("--tolerance", type=float, default=0.0,
                     help="max tolerated decoy failure fraction per check")
    run.add_argument("--decoy-pairs", type=int, default=None,
                     help="decoy pairs per hop (default n/2)")
    run.add_argument("--adversary", default="none",
                     help="preset (none, eve, collusion) or JSON config")
    run.add_argument("--announce-order", default=None,
                     help="comma-separated reveal schedule; '+' joins a simultaneous batch")
    run.add_argument("--force-secrets", default=None,
                     help='JSON {"A": [K, R], ...} overriding random secrets')
    run.add_argument("--output", default=None, help="transcript path ('-' for stdout)")
    run.set_defaults(func=cmd_run)

    demo = sub.add_parser(
        "attack-demo",
        help="run the canonical 2-bit collusion scenario and check every intermediate",
    )
    demo.add_argument("--target", default=DEMO_DEFAULT_TARGET,
                      help="2-bit key the colluders force on Bob")
    demo.add_argument("--seed", type=int, default=_default_seed())
    demo.add_argument("--output", default=None, help="write the transcript JSON here")
    demo.set_defaults(func=cmd_attack_demo)

    mc = sub.add_parser("montecarlo", help="run seeded trial sweeps and summarize")
    mc.add_argument("--trials", type=int, default=100)
    mc.add_argument("--n", default="4", help="comma-separated message lengths")
    mc.add_argument("--tolerance", default="0", help="comma-separated tolerances")
    mc.add_argument("--fraction", default=None,
                    help="comma-separated intercept fractions to sweep")
    mc.add_argument("--adversary", default="none",
                    help="preset (none, eve, collusion) or JSON config")
    mc.add_argument("--seed", type=int, default=_default_seed())
    mc.add_argument("--format", choices=("csv", "json"), default="csv")
    mc.add_argument("--output", default=None, help="summary path ('-' for stdout)")
    mc.set_defaults(func=cmd_montecarlo)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qka-sim: error: {exc}", file=sys.stderr)
        return 1
    except AttackInfeasibleError as exc:
        print(f"qka-sim: attack infeasible: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
