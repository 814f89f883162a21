"""Experiment harness: aggregation, CSV contract, determinism, summary."""

import json

import numpy as np
import pytest

from logitq.experiment import (
    CSV_COLUMNS,
    ExperimentBundle,
    ExperimentConfig,
    run_experiment,
    summarize,
)
from logitq.game import ConfigError, GameGenConfig, MarkovGame, save_game


def small_config(**overrides):
    base = dict(
        game=GameGenConfig(2, 2, 2, 0.6, seed=0),
        scheme="freq",
        rounds=4,
        base_length=50,
        n_runs=3,
        seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(n_runs=0)
    with pytest.raises(ConfigError):
        small_config(rounds=0)
    with pytest.raises(ConfigError):
        small_config(model="oracle")


def test_config_from_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "game": {"n_states": 2, "n_agents": 2, "n_actions": 2, "discount": 0.6, "seed": 0},
                "scheme": "ave",
                "rounds": 3,
                "base_length": 20,
                "n_runs": 2,
                "seed": 5,
            }
        )
    )
    cfg = ExperimentConfig.from_json(path)
    assert cfg.scheme.value == "ave"
    assert cfg.game.n_states == 2


def test_config_from_json_rejects_unknown_fields(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"game": {"n_states": 1, "n_agents": 1, "n_actions": 2, "discount": 0.5}, "bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_json(path)


def test_config_from_json_game_path(tmp_path):
    transition = np.ones((1, 2, 1))
    game = MarkovGame(1, 1, (2,), np.array([[1.0, 0.0]]), transition, 0.5)
    game_path = tmp_path / "game.json"
    save_game(game, game_path)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"game": {"path": str(game_path)}, "rounds": 2, "n_runs": 1}))
    bundle = run_experiment(ExperimentConfig.from_json(cfg_path))
    assert bundle.game.n_states == 1


def test_aggregates_ordered_min_mean_max():
    bundle = run_experiment(small_config())
    assert (bundle.v_min <= bundle.v_mean + 1e-15).all()
    assert (bundle.v_mean <= bundle.v_max + 1e-15).all()


def test_single_run_degenerate_envelope():
    cfg = small_config(game=GameGenConfig(1, 1, 2, 0.5, seed=1), n_runs=1)
    bundle = run_experiment(cfg)
    np.testing.assert_array_equal(bundle.v_min, bundle.v_max)
    np.testing.assert_array_equal(bundle.v_min, bundle.v_mean)


def test_csv_row_count_and_columns(tmp_path):
    cfg = small_config(out=tmp_path / "exp")
    bundle = run_experiment(cfg)
    lines = [l for l in bundle.csv_path.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) - 1 == cfg.n_runs * cfg.rounds * bundle.game.n_states


def test_csv_byte_identical_across_invocations_and_threads(tmp_path):
    cfg_a = small_config(out=tmp_path / "a", threads=1)
    cfg_b = small_config(out=tmp_path / "b", threads=3)
    bundle_a = run_experiment(cfg_a)
    bundle_b = run_experiment(cfg_b)
    assert bundle_a.csv_path.read_bytes() == bundle_b.csv_path.read_bytes()


def test_summary_fraction_all_converged():
    bundle = run_experiment(small_config(rounds=12, base_length=100, n_runs=2))
    summary = summarize(bundle)
    assert summary["fraction_in_band"] == 1.0
    assert len(summary["final_sup_delta_v"]) == 2
    assert summary["total_stages"] == 2 * sum(100 * n * n for n in range(1, 13))


def test_summarize_rejects_empty():
    bundle = run_experiment(small_config(n_runs=1))
    bundle.records[0].rows = []
    with pytest.raises(ValueError, match="no rounds"):
        summarize(
            ExperimentBundle(
                config=bundle.config,
                game=bundle.game,
                exact=bundle.exact,
                records=[bundle.records[0]],
                diagnostics=[[]],
                recurrent=bundle.recurrent,
            )
        )


def test_learned_model_experiment_runs(tmp_path):
    cfg = small_config(model="learned", explore_steps=2000, rounds=3, out=tmp_path / "learned")
    bundle = run_experiment(cfg)
    assert bundle.records[0].model is not None
    assert bundle.records[0].rows[0].stage_count == 2000
