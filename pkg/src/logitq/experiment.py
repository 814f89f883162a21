"""Multi-run experiment harness with machine-readable CSV and JSON outputs.

The game is solved exactly once as the oracle, then n_runs independent
seeded runs execute (one worker thread per run, joined in run order so
results are deterministic). Per-run seeds come from spawning the master
seed: numpy SeedSequence(seed).spawn(n_runs)[run_index]. The CSV is long
format, one row per (run, round, state), with `#` comment lines echoing the
effective configuration.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsCollector, DiagnosticsRecord, value_band
from .estimation import run_dynamics_model_free
from .game import ConfigError, GameGenConfig, MarkovGame, generate_random_game, load_game
from .graphs import build_state_graph, recurrent_classes
from .rounds import RoundSchedule, RunRecord, UpdateScheme, run_dynamics
from .solver import ExactSolution, solve

CSV_COLUMNS = (
    "run",
    "round",
    "stage_count",
    "state",
    "v",
    "delta_v",
    "tracking_error",
    "eta_tv_gap",
    "band_lower",
    "band_upper",
    "v_star",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a game source, a scheme, and the run/round schedule."""

    game: GameGenConfig | str | Path
    scheme: UpdateScheme | str = UpdateScheme.MOST_FREQUENT
    model: str = "known"  # "known" or "learned"
    tau: float = 1e-3
    rounds: int = 40
    base_length: int = 100
    explore_steps: int | None = None  # length of round 1 in learned mode
    n_runs: int = 20
    seed: int = 0
    reward_noise: float = 0.0
    threads: int | None = None
    out: str | Path | None = None

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be positive, got {self.n_runs}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be positive, got {self.rounds}")
        if self.model not in ("known", "learned"):
            raise ConfigError(f"model must be 'known' or 'learned', got {self.model!r}")
        object.__setattr__(self, "scheme", UpdateScheme(self.scheme))

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        game_doc = doc.pop("game", None)
        if game_doc is None:
            raise ConfigError(f"{path}: missing 'game' entry")
        if isinstance(game_doc, str):
            game: GameGenConfig | str = game_doc
        elif isinstance(game_doc, dict) and "path" in game_doc:
            game = game_doc["path"]
        elif isinstance(game_doc, dict):
            game = GameGenConfig(
                n_states=int(game_doc["n_states"]),
                n_agents=int(game_doc["n_agents"]),
                n_actions=(
                    tuple(game_doc["n_actions"])
                    if isinstance(game_doc["n_actions"], list)
                    else int(game_doc["n_actions"])
                ),
                discount=float(game_doc["discount"]),
                transition_range=tuple(game_doc.get("transition_range", (0.2, 1.0))),
                seed=game_doc.get("seed"),
            )
        else:
            raise ConfigError(f"{path}: 'game' must be a path or a generator config")
        known = {f for f in cls.__dataclass_fields__ if f != "game"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
        return cls(game=game, **doc)


@dataclass
class ExperimentBundle:
    config: ExperimentConfig
    game: MarkovGame
    exact: ExactSolution
    records: list[RunRecord]
    diagnostics: list[list[DiagnosticsRecord]]
    recurrent: list[set[int]]
    v_min: np.ndarray | None = None  # (rounds, n_states)
    v_mean: np.ndarray | None = None
    v_max: np.ndarray | None = None
    runtime_s: float = 0.0
    csv_path: Path | None = None
    summary_path: Path | None = None


def _resolve_game(cfg: ExperimentConfig) -> MarkovGame:
    if isinstance(cfg.game, GameGenConfig):
        return generate_random_game(cfg.game)
    return load_game(cfg.game)


def _schedule(cfg: ExperimentConfig) -> RoundSchedule:
    first = None
    if cfg.model == "learned":
        first = cfg.explore_steps if cfg.explore_steps is not None else 10**6
    return RoundSchedule(total_rounds=cfg.rounds, base_length=cfg.base_length, first_round_length=first)


def _one_run(
    run_index: int,
    game: MarkovGame,
    cfg: ExperimentConfig,
    exact: ExactSolution,
    seed_seq: np.random.SeedSequence,
) -> tuple[RunRecord, list[DiagnosticsRecord]]:
    rng = np.random.default_rng(seed_seq)
    collector = DiagnosticsCollector(exact, cfg.tau, game.discount, game.n_joint_actions)
    schedule = _schedule(cfg)
    if cfg.model == "learned":
        record = run_dynamics_model_free(
            game, schedule, cfg.scheme, cfg.tau, rng, hooks=(collector,), reward_noise=cfg.reward_noise
        )
    else:
        record = run_dynamics(game, schedule, cfg.scheme, cfg.tau, rng, hooks=(collector,))
    return record, collector.records


def run_experiment(cfg: ExperimentConfig) -> ExperimentBundle:
    """Solve the game once, fan the seeded runs out over worker threads,
    aggregate per-round per-state envelopes, and write CSV + JSON summary
    when an output prefix is configured."""
    t0 = time.perf_counter()
    game = _resolve_game(cfg)
    exact = solve(game, tau=cfg.tau)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_runs)
    workers = cfg.threads if cfg.threads is not None else min(cfg.n_runs, os.cpu_count() or 1)
    workers = max(1, workers)
    if workers == 1:
        results = [_one_run(i, game, cfg, exact, seeds[i]) for i in range(cfg.n_runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one_run, i, game, cfg, exact, seeds[i]) for i in range(cfg.n_runs)]
            results = [f.result() for f in futures]  # join in run order
    records = [r for r, _ in results]
    diagnostics = [d for _, d in results]

    v_stack = np.stack([[row.v for row in rec.rows] for rec in records])  # (runs, rounds, states)
    bundle = ExperimentBundle(
        config=cfg,
        game=game,
        exact=exact,
        records=records,
        diagnostics=diagnostics,
        recurrent=recurrent_classes(build_state_graph(game)),
        v_min=v_stack.min(axis=0),
        v_mean=v_stack.mean(axis=0),
        v_max=v_stack.max(axis=0),
        runtime_s=time.perf_counter() - t0,
    )
    if cfg.out is not None:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        bundle.csv_path = Path(str(out) + ".csv")
        bundle.summary_path = Path(str(out) + ".summary.json")
        write_csv(bundle, bundle.csv_path)
        bundle.summary_path.write_text(json.dumps(summarize(bundle), indent=2, sort_keys=True))
    return bundle


def _format(x: float) -> str:
    return repr(float(x))


def write_csv(bundle: ExperimentBundle, path: str | Path) -> None:
    """Long-format rows ordered by (run, round, state); float text is repr()
    so identical configurations produce byte-identical files."""
    cfg = bundle.config
    game = bundle.game
    lower, upper = value_band(cfg.tau, game.discount, game.n_joint_actions)
    if cfg.scheme is UpdateScheme.MOST_FREQUENT:
        lower, upper = 0.0, 0.0  # the frequency scheme converges exactly
    lines = [
        "# logitq experiment"
        f" scheme={cfg.scheme.value} model={cfg.model} tau={_format(cfg.tau)}"
        f" gamma={_format(game.discount)} rounds={cfg.rounds} base_length={cfg.base_length}"
        f" explore_steps={cfg.explore_steps} n_runs={cfg.n_runs} seed={cfg.seed}"
        f" reward_noise={_format(cfg.reward_noise)}",
        f"# game: n_states={game.n_states} n_agents={game.n_agents}"
        f" action_counts={','.join(str(c) for c in game.action_counts)}",
        "# per-run seeds: numpy SeedSequence(seed).spawn(n_runs)[run_index]",
        "# stage_count is cumulative; band_lower/band_upper are absolute bounds around v_star",
        ",".join(CSV_COLUMNS),
    ]
    for run_index, (record, diags) in enumerate(zip(bundle.records, bundle.diagnostics)):
        for row, diag in zip(record.rows, diags):
            for s in range(game.n_states):
                v_star = bundle.exact.v_star[s]
                lines.append(
                    ",".join(
                        (
                            str(run_index),
                            str(row.round_index),
                            str(row.stage_count),
                            str(s),
                            _format(row.v[s]),
                            _format(diag.delta_v[s]),
                            _format(row.tracking_error[s]),
                            _format(row.eta_tv_gap[s]),
                            _format(v_star + lower),
                            _format(v_star + upper),
                            _format(v_star),
                        )
                    )
                )
    Path(path).write_text("\n".join(lines) + "\n")


def summarize(bundle: ExperimentBundle, slack: float = 0.05) -> dict:
    """Final-round deviations per run and the fraction of runs ending inside
    the scheme's band (within `slack`) on the reached recurrent class."""
    if not bundle.records or not bundle.records[0].rows:
        raise ValueError("no rounds to summarize")
    cfg = bundle.config
    game = bundle.game
    lower, _ = value_band(cfg.tau, game.discount, game.n_joint_actions)
    if cfg.scheme is UpdateScheme.MOST_FREQUENT:
        lower = 0.0
    final_sup: list[float] = []
    in_band: list[bool] = []
    for record, diags in zip(bundle.records, bundle.diagnostics):
        states = _reached_class(bundle, record.final_state)
        delta = diags[-1].delta_v[states]
        final_sup.append(float(np.abs(delta).max()))
        in_band.append(bool(np.all(delta >= lower - slack) and np.all(delta <= slack)))
    total_stages = sum(rec.rows[-1].stage_count for rec in bundle.records)
    return {
        "scheme": cfg.scheme.value,
        "model": cfg.model,
        "tau": cfg.tau,
        "gamma": game.discount,
        "rounds": cfg.rounds,
        "n_runs": cfg.n_runs,
        "seed": cfg.seed,
        "band_lower_offset": lower,
        "band_slack": slack,
        "final_sup_delta_v": final_sup,
        "fraction_in_band": sum(in_band) / len(in_band),
        "total_stages": total_stages,
        "runtime_s": bundle.runtime_s,
        "v_star": bundle.exact.v_star.tolist(),
        "recurrent_classes": [sorted(c) for c in bundle.recurrent],
    }


def _reached_class(bundle: ExperimentBundle, final_state: int) -> list[int]:
    for cls in bundle.recurrent:
        if final_state in cls:
            return sorted(cls)
    return sorted(set().union(*bundle.recurrent))
