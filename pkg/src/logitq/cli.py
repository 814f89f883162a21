"""Command-line entry point: solve, simulate, experiment, analyze, verify-stationary.

Exit codes: 0 on success, 1 on flag/config validation errors (the message
names the offending flag), 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .estimation import run_dynamics_model_free
from .experiment import ExperimentConfig, run_experiment, summarize
from .game import ConfigError, GameGenConfig, MarkovGame, generate_random_game, load_game
from .graphs import build_state_graph, recurrent_classes, transient_states
from .rounds import RoundSchedule, UpdateScheme, run_dynamics
from .solver import solve

Q_ELIDE_THRESHOLD = 100_000  # entries above which solve output drops the Q tensor


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); validation errors are exit 1
        raise _UsageError(message)


def _load_or_generate(args) -> MarkovGame:
    if args.game is not None:
        game = load_game(args.game)
        if args.gamma is not None and game.discount != args.gamma:
            game = dataclasses.replace(game, discount=args.gamma)
        return game
    if args.states is None or args.agents is None or args.actions is None:
        raise _UsageError("--game or all of --states/--agents/--actions required")
    if args.gamma is None:
        raise _UsageError("--gamma is required with a generated game")
    return generate_random_game(
        GameGenConfig(
            n_states=args.states,
            n_agents=args.agents,
            n_actions=args.actions,
            discount=args.gamma,
            seed=args.game_seed,
        )
    )


def _emit(doc: dict, out: str | None, verbose: bool) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
        if verbose:
            print(f"wrote {out}")
    else:
        print(text)


def _cmd_solve(args) -> int:
    game = _load_or_generate(args)
    sol = solve(game, tau=args.tau, tol=args.tol, max_iters=args.max_iters)
    doc = {
        "config": {"tau": args.tau, "tol": args.tol, "max_iters": args.max_iters, "gamma": game.discount},
        "v_star": sol.v_star.tolist(),
        "mu_star": sol.mu_star.tolist() if sol.mu_star.size <= Q_ELIDE_THRESHOLD else None,
        "q_star": sol.q_star.tolist() if sol.q_star.size <= Q_ELIDE_THRESHOLD else None,
        "residual": sol.residual,
        "iterations": sol.iterations,
    }
    _emit(doc, args.out, args.verbose)
    return 0


def _cmd_analyze(args) -> int:
    game = _load_or_generate(args)
    graph = build_state_graph(game)
    doc = {
        "recurrent_classes": [sorted(c) for c in recurrent_classes(graph)],
        "transient_states": sorted(transient_states(graph)),
    }
    _emit(doc, args.out, args.verbose)
    return 0


def _cmd_simulate(args) -> int:
    game = _load_or_generate(args)
    rng = np.random.default_rng(args.seed)
    schedule = RoundSchedule(
        total_rounds=args.rounds,
        base_length=args.base_length,
        first_round_length=args.explore_steps if args.model == "learned" else None,
    )
    scheme = UpdateScheme(args.scheme)
    if args.model == "learned":
        record = run_dynamics_model_free(
            game, schedule, scheme, args.tau, rng, reward_noise=args.noise
        )
    else:
        record = run_dynamics(game, schedule, scheme, args.tau, rng)
    doc = {
        "config": {
            "scheme": scheme.value,
            "model": args.model,
            "tau": args.tau,
            "gamma": game.discount,
            "rounds": args.rounds,
            "base_length": args.base_length,
            "explore_steps": args.explore_steps if args.model == "learned" else None,
            "seed": args.seed,
            "noise": args.noise,
        },
        "rounds": [
            {
                "round": row.round_index,
                "stage_count": row.stage_count,
                "v": row.v.tolist(),
                "tracking_error": row.tracking_error.tolist(),
                "eta_tv_gap": row.eta_tv_gap.tolist(),
            }
            for row in record.rows
        ],
        "final_state": record.final_state,
        "wall_clock_s": record.wall_clock_s,
    }
    _emit(doc, args.out, args.verbose)
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    bundle = run_experiment(cfg)
    if bundle.csv_path is None:
        print(json.dumps(summarize(bundle), indent=2, sort_keys=True))
    elif args.verbose:
        print(f"wrote {bundle.csv_path} and {bundle.summary_path}")
    return 0


def _cmd_verify_stationary(args) -> int:
    rng = np.random.default_rng(args.seed)
    gaps = []
    for _ in range(args.trials):
        n_agents = int(rng.integers(1, args.max_agents + 1))
        counts = tuple(int(rng.integers(2, args.max_actions + 1)) for _ in range(n_agents))
        game = generate_random_game(
            GameGenConfig(n_states=1, n_agents=n_agents, n_actions=counts, discount=0.5),
            rng=rng,
        )
        q = rng.uniform(-1.0, 1.0, size=(1, game.n_joint_actions))
        tau = float(rng.uniform(0.2, 2.0))
        p = dyn.transition_matrix(game, q, 0, tau)
        gap = float(
            np.abs(dyn.stationary_brute_force(p) - dyn.stationary_closed_form(q, 0, tau)).max()
        )
        gaps.append(gap)
    doc = {"trials": args.trials, "seed": args.seed, "gaps": gaps, "max_gap": max(gaps)}
    _emit(doc, args.out, args.verbose)
    return 0


def _add_game_source(p: _Parser, with_gamma_default: float | None = None) -> None:
    p.add_argument("--game", help="path to a game JSON document")
    p.add_argument("--states", type=int, help="states for a generated game")
    p.add_argument("--agents", type=int, help="agents for a generated game")
    p.add_argument("--actions", type=int, help="actions per agent for a generated game")
    p.add_argument("--game-seed", type=int, default=0, help="seed for the game generator")
    p.add_argument(
        "--gamma",
        type=float,
        default=with_gamma_default,
        help="discount factor (overrides the game file when given)",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="logitq", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser(
        "solve", help="compute v*, Q* and the limiting logit distribution", parents=[common]
    )
    _add_game_source(p)
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser(
        "analyze", parents=[common], help="recurrent classes and transient states"
    )
    _add_game_source(p)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="one seeded run of the dynamics")
    _add_game_source(p)
    p.add_argument("--scheme", choices=[s.value for s in UpdateScheme], default="freq")
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--rounds", type=int, default=40)
    p.add_argument("--base-length", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=["known", "learned"], default="known")
    p.add_argument("--explore-steps", type=int, default=10**6, help="round 1 length in learned mode")
    p.add_argument("--noise", type=float, default=0.0, help="reward noise half-width in learned mode")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser(
        "experiment", parents=[common], help="multi-run experiment from a JSON config"
    )
    p.add_argument("--config", required=True, help="path to an experiment config JSON")
    p.add_argument("--out", help="output prefix override (.csv / .summary.json appended)")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser(
        "verify-stationary",
        parents=[common],
        help="closed-form vs brute-force stationary distributions on random stage games",
    )
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--max-agents", type=int, default=3)
    p.add_argument("--max-actions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_verify_stationary)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
