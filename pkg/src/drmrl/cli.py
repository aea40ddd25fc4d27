"""Command-line entry point: ``drmrl {plan,run,gen-instance,verify}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import DRMError
from .harness import format_summary, load_config, load_instance, parse_params, parse_risk_spec, run_experiment, summary_path
from .mdp import write_mdp
from .planning import compute_gaps, drm_value_iteration

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


def _seeds(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drmrl", description="Risk-sensitive tabular RL with dynamic risk measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="exact DRM planning: print V*, Q* and gaps")
    p.add_argument("source", help="MDP file or generator name (experiment, tree, gap)")
    p.add_argument("params", nargs="*", help="generator parameters as key=value")
    p.add_argument("--risk", default="mean", help="mean | cvar:0.05 | cvar:[0.09,0.08,0.07,0.05] | erm:-1")

    r = sub.add_parser("run", help="run a regret experiment from an INI config")
    r.add_argument("config")
    r.add_argument("--seeds", type=_seeds, help="comma list or range a..b; overrides the config")
    r.add_argument("--out", help="CSV path; overrides the config")
    r.add_argument("--delta", type=float)
    r.add_argument("--clip", action=argparse.BooleanOptionalAction, default=None,
                   help="clip optimistic values to [0, H+1-h]")
    r.add_argument("--bonus-scale", type=float, help="multiplier on bonuses and confidence radii")
    r.add_argument("--workers", type=int, default=1)

    g = sub.add_parser("gen-instance", help="write a generated MDP to a text file")
    g.add_argument("name")
    g.add_argument("params", nargs="*")
    g.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="run the randomized oracle checks")
    v.add_argument("--full", action="store_true", help="also run the 10^4-episode learning checks")
    return parser


def _print_table(label: str, arr: np.ndarray) -> None:
    print(label)
    for h, block in enumerate(arr, start=1):
        print(f"  h={h}")
        for s, row in enumerate(block, start=1):
            print(f"    s={s}: " + " ".join(f"{v:.6f}" for v in row))


def cmd_plan(args) -> int:
    mdp = load_instance(args.source, parse_params(args.params))
    risks = parse_risk_spec(args.risk, mdp.H)
    tables = drm_value_iteration(mdp, risks)
    gaps = compute_gaps(tables)
    print(f"S={mdp.S} A={mdp.A} H={mdp.H} risks={risks}")
    print("V* (rows: stage, columns: state)")
    for h in range(mdp.H):
        print(f"  h={h + 1}: " + " ".join(f"{v:.6f}" for v in tables.V[h]))
    _print_table("Q* (rows: state, columns: action)", tables.Q)
    _print_table("gaps", gaps.gaps)
    print("greedy actions (1-based): " + "; ".join(
        f"h={h + 1}: " + " ".join(str(a + 1) for a in tables.pi.actions[h]) for h in range(mdp.H)))
    print(f"minimum positive gap: {gaps.delta_min if gaps.delta_min is not None else 'none'}")
    init = mdp.initial @ tables.V[0]
    print(f"V*_1 under the initial distribution: {init:.6f}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, seeds=args.seeds, out=args.out, delta=args.delta,
                      clip=args.clip, bonus_scale=args.bonus_scale)
    result = run_experiment(cfg, workers=args.workers)
    print(format_summary(result.summary))
    if cfg.out:
        print(f"wrote {cfg.out} and {summary_path(cfg.out)}")
    return EXIT_OK


def cmd_gen(args) -> int:
    mdp = load_instance(args.name, parse_params(args.params))
    write_mdp(mdp, args.out)
    print(f"wrote {args.out} (S={mdp.S}, A={mdp.A}, H={mdp.H})")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks(full=args.full)
    for res in results:
        print(res.line(), flush=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"plan": cmd_plan, "run": cmd_run, "gen-instance": cmd_gen, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except (DRMError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
