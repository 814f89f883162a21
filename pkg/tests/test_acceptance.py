"""Acceptance suite: the library's verification contract, one report line per check.

The multi-run checks share two session fixtures (the frequency-scheme and
averaging-scheme experiments on the same fixed random game) so the suite
stays within its runtime budget. The fixed game seed matters: the chosen
game's stage games have unique pure-Nash profiles at every state, so
desk-scale rounds are long enough for the within-round chains to settle.
At temperatures this low, a game with a second coordination equilibrium can
pin individual runs to it for any feasible round length; see the README's
temperature notes.
"""

import math
import time

import numpy as np
import pytest

from logitq.diagnostics import bias_band, deviation_envelope, value_band
from logitq.dynamics import (
    StagePlayState,
    stationary_brute_force,
    stationary_closed_form,
    transition_matrix,
)
from logitq.experiment import ExperimentConfig, run_experiment
from logitq.game import GameGenConfig, MarkovGame, generate_random_game
from logitq.graphs import build_state_graph, check_projection, recurrent_classes
from logitq.rounds import (
    RoundEstimates,
    run_round,
    sampled_frequency,
    v_average,
    v_most_frequent,
)
from logitq.solver import bellman_backup, logit_distribution, solve

GAME_SEED = 0  # fixed instantiation of the desk-scale 2x2x2 random game
MASTER_SEED = 123
TAU = 1e-3
GAMMA = 0.6


def report(name: str, detail: str = "") -> None:
    print(f"\n[acceptance] {name}: PASS {detail}".rstrip())


@pytest.fixture(scope="session")
def desk_game():
    return generate_random_game(GameGenConfig(2, 2, 2, GAMMA, seed=GAME_SEED))


@pytest.fixture(scope="session")
def desk_solution(desk_game):
    return solve(desk_game, tau=TAU, tol=1e-12)


@pytest.fixture(scope="session")
def freq_bundle(desk_game):
    cfg = ExperimentConfig(
        game=GameGenConfig(2, 2, 2, GAMMA, seed=GAME_SEED),
        scheme="freq",
        tau=TAU,
        rounds=40,
        base_length=100,
        n_runs=20,
        seed=MASTER_SEED,
    )
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def ave_bundle(desk_game):
    cfg = ExperimentConfig(
        game=GameGenConfig(2, 2, 2, GAMMA, seed=GAME_SEED),
        scheme="ave",
        tau=TAU,
        rounds=40,
        base_length=100,
        n_runs=20,
        seed=MASTER_SEED,
    )
    return run_experiment(cfg)


def test_bellman_contraction_and_residual():
    """Sup-norm sweep changes contract by gamma; final residual at 1e-10."""
    t0 = time.time()
    rng = np.random.default_rng(1)
    for trial in range(10):
        n_agents = int(rng.integers(1, 4))
        counts = tuple(int(rng.integers(2, 4)) for _ in range(n_agents))
        game = generate_random_game(
            GameGenConfig(5, n_agents, counts, GAMMA, seed=1000 + trial)
        )
        q = game.reward.copy()
        prev_change = None
        for _ in range(80):
            q_next = bellman_backup(game, q)
            change = float(np.abs(q_next - q).max())
            q = q_next
            if prev_change is not None and prev_change > 1e-13:
                assert change <= GAMMA * prev_change + 1e-9
            prev_change = change
        sol = solve(game, tau=TAU, tol=1e-11)
        assert sol.residual <= 1e-10
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report("bellman contraction", f"(10 games, {elapsed:.2f}s)")


def test_stationary_closed_form_matches_brute_force():
    """Chain stationary law equals the softmax closed form to 1e-8."""
    t0 = time.time()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        n_agents = int(rng.integers(1, 4))
        counts = tuple(int(rng.integers(2, 4)) for _ in range(n_agents))
        n_j = int(np.prod(counts))
        game = MarkovGame(n_agents, 1, counts, np.zeros((1, n_j)), np.ones((1, n_j, 1)), GAMMA)
        q = rng.uniform(-1.0, 1.0, size=(1, n_j))
        tau = float(rng.uniform(0.2, 2.0))
        p = transition_matrix(game, q, 0, tau)
        gap = float(np.abs(stationary_brute_force(p) - stationary_closed_form(q, 0, tau)).max())
        worst = max(worst, gap)
    assert worst <= 1e-8
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report("stationary distribution closed form", f"(worst gap {worst:.2e}, {elapsed:.2f}s)")


def test_ergodic_tracking_million_step_chain():
    """Million-step chain: TV(eta, mu) <= 0.01; value updates track it."""
    t0 = time.time()
    game = MarkovGame(2, 1, (2, 2), np.zeros((1, 4)), np.ones((1, 4, 1)), GAMMA)
    q = np.array([[0.9, 0.2, -0.3, 0.5]])
    tau = 0.5
    estimates = RoundEstimates(
        q=q,
        v=np.zeros(1),
        c_state=np.zeros(1, dtype=np.int64),
        c_profile=np.zeros((1, 4), dtype=np.int64),
    )
    play = StagePlayState.fresh(game)
    run_round(game, estimates, play, 10**6, 0, tau, np.random.default_rng(3))
    eta = sampled_frequency(estimates)[0]
    mu = stationary_closed_form(q, 0, tau)
    tv = 0.5 * float(np.abs(eta - mu).sum())
    assert tv <= 0.01
    assert abs(v_average(estimates)[0] - float(mu @ q[0])) <= 0.01
    assert v_most_frequent(estimates)[0] == q[0].max()
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report("ergodic tracking", f"(TV {tv:.4f}, {elapsed:.2f}s)")


def test_frequency_scheme_converges(freq_bundle):
    """Final sup |v - v*| <= 0.05 in at least 18 of 20 known-model runs."""
    ok = sum(1 for sup in _final_sups(freq_bundle) if sup <= 0.05)
    assert ok >= 18
    report("frequency-scheme convergence", f"({ok}/20 runs within 0.05)")


def test_average_scheme_lands_in_band(ave_bundle):
    """Final v within [v* - tau ln|A|/(1-gamma) - 0.05, v* + 0.05] in >= 18/20 runs."""
    game = ave_bundle.game
    lower = value_band(TAU, GAMMA, game.n_joint_actions)[0]
    assert lower == pytest.approx(-TAU * math.log(4) / (1 - GAMMA))
    ok = 0
    for diags in ave_bundle.diagnostics:
        delta = diags[-1].delta_v
        ok += bool(np.all(delta >= lower - 0.05) and np.all(delta <= 0.05))
    assert ok >= 18
    report("averaging-scheme band", f"({ok}/20 runs in band, lower offset {lower:.6f})")


def test_learned_model_converges_and_estimates_track_truth(desk_game, desk_solution):
    """Learned model: >= 16/20 runs converge; r-hat and p-hat near truth."""
    t0 = time.time()
    cfg = ExperimentConfig(
        game=GameGenConfig(2, 2, 2, GAMMA, seed=GAME_SEED),
        scheme="freq",
        model="learned",
        tau=TAU,
        rounds=41,  # exploration round, then the known-model schedule
        base_length=100,
        explore_steps=10**5,
        n_runs=20,
        seed=MASTER_SEED,
    )
    bundle = run_experiment(cfg)
    ok = sum(1 for sup in _final_sups(bundle) if sup <= 0.05)
    assert ok >= 16
    for record in bundle.records:
        est = record.model
        visited = est.visit_count > 0
        assert visited.any()
        r_gap = float(np.abs(est.reward_estimate() - desk_game.reward)[visited].max())
        assert r_gap <= 0.02
        p_hat = est.transition_estimate()
        tv = 0.5 * np.abs(p_hat - desk_game.transition).sum(axis=2)
        assert float(tv[visited].max()) <= 0.02
    elapsed = time.time() - t0
    assert elapsed < 300.0
    report("learned-model convergence", f"({ok}/20 runs within 0.05, {elapsed:.1f}s)")


def test_trajectories_absorb_and_projection_holds():
    """Trajectories enter the closed class and stay; projection oracle true on 50 games."""
    transition = np.zeros((4, 2, 4))
    transition[0, :, 1] = 0.5
    transition[0, :, 2] = 0.5
    transition[1, :, 0] = 0.6
    transition[1, :, 3] = 0.4
    transition[2, :, 2] = 0.5
    transition[2, :, 3] = 0.5
    transition[3, :, 2] = 0.3
    transition[3, :, 3] = 0.7
    reward = np.random.default_rng(4).uniform(size=(4, 2))
    game = MarkovGame(1, 4, (2,), reward, transition, GAMMA)
    classes = recurrent_classes(build_state_graph(game))
    assert classes == [{2, 3}]
    for seed in range(5):
        estimates = RoundEstimates.initial(game)
        play = StagePlayState.fresh(game)
        _, trace = run_round(
            game, estimates, play, 10**5, 0, 0.1, np.random.default_rng(seed), record_states=True
        )
        inside = np.isin(trace, [2, 3])
        first = int(np.argmax(inside))
        assert inside.any() and inside[first:].all()

    rng = np.random.default_rng(5)
    for trial in range(50):
        n_states = int(rng.integers(1, 3))
        n_agents = int(rng.integers(1, 3))
        counts = tuple(int(rng.integers(1, 4)) for _ in range(n_agents))
        if trial % 2 == 0:
            game = _sparse_tiny_game(rng, n_states, counts)
        else:
            game = generate_random_game(GameGenConfig(n_states, n_agents, counts, 0.5), rng=rng)
        assert check_projection(game)
    report("recurrence and projection", "(zero exits; 50/50 projections)")


def test_envelope_contains_q_deviation_every_round(freq_bundle, ave_bundle):
    """Measured Q deviation inside the tracking-error envelope at every round."""
    rounds_checked = 0
    for bundle in (freq_bundle, ave_bundle):
        q_bound = float(np.abs(bundle.exact.q_star).max()) + bundle.exact.residual
        for diags in bundle.diagnostics:
            history = [
                (float(r.tracking_error.min()), float(r.tracking_error.max())) for r in diags
            ]
            for k, rec in enumerate(diags, start=1):
                lower, upper = deviation_envelope(history[: k - 1], GAMMA, q_bound)
                assert lower - 1e-9 <= rec.delta_q_min
                assert rec.delta_q_max <= upper + 1e-9
                rounds_checked += 1
    report("deviation envelope containment", f"({rounds_checked} rounds, zero violations)")


def test_bias_bound_on_closed_form_rows():
    """Stationary expectation minus max lies in [-tau ln|A|, 0] on 100 random rows."""
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(2, 28))
        row = rng.uniform(-1.0, 1.0, size=n)
        for tau in (1e-3, 0.1, 1.0):
            mu = logit_distribution(row, tau)
            bias = float(mu @ row - row.max())
            lo, _ = bias_band(tau, n)
            # 1e-12 absorbs float rounding in the dot product
            if not lo - 1e-12 <= bias <= 1e-12:
                violations += 1
    assert violations == 0
    report("bias bound", "(300 row/temperature pairs, zero violations)")


def test_experiment_csv_byte_identical(tmp_path):
    """Repeated experiment invocations with one master seed match byte for byte."""
    def run(out, threads):
        cfg = ExperimentConfig(
            game=GameGenConfig(2, 2, 2, GAMMA, seed=GAME_SEED),
            scheme="ave",
            tau=TAU,
            rounds=6,
            base_length=50,
            n_runs=5,
            seed=MASTER_SEED,
            out=out,
            threads=threads,
        )
        return run_experiment(cfg).csv_path.read_bytes()

    first = run(tmp_path / "one", threads=2)
    second = run(tmp_path / "two", threads=1)
    assert first == second
    report("experiment determinism", f"({len(first)} bytes, identical)")


def _final_sups(bundle):
    sups = []
    for diags in bundle.diagnostics:
        sups.append(float(np.abs(diags[-1].delta_v).max()))
    return sups


def _sparse_tiny_game(rng, n_states, counts):
    n_j = int(np.prod(counts))
    transition = rng.uniform(0.1, 1.0, size=(n_states, n_j, n_states))
    mask = rng.random(transition.shape) < 0.5
    transition[mask] = 0.0
    for s in range(n_states):
        for a in range(n_j):
            if transition[s, a].sum() == 0.0:
                transition[s, a, rng.integers(n_states)] = 1.0
    transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.uniform(size=(n_states, n_j))
    return MarkovGame(len(counts), n_states, counts, reward, transition, 0.5)
