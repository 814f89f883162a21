"""Model-free variant: empirical payoff and kernel estimates feed the backup.

Counts accumulate over the whole history, never resetting at round
boundaries. Q starts at zero, which makes the first round fully exploring
(the logit response over a constant row is uniform); a long first round lets
the estimates settle before the value updates start to matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .game import MarkovGame
from .rounds import Hook, RoundEstimates, RoundSchedule, RunRecord, UpdateScheme, _run_loop


@dataclass
class ModelEstimates:
    """Running sums for r-hat and p-hat since the initial stage."""

    reward_sum: np.ndarray  # (n_states, n_joint_actions)
    visit_count: np.ndarray  # (n_states, n_joint_actions) int64
    transition_count: np.ndarray  # (n_states, n_joint_actions, n_states) int64

    @classmethod
    def zeros(cls, game: MarkovGame) -> "ModelEstimates":
        n_s, n_j = game.n_states, game.n_joint_actions
        return cls(
            reward_sum=np.zeros((n_s, n_j)),
            visit_count=np.zeros((n_s, n_j), dtype=np.int64),
            transition_count=np.zeros((n_s, n_j, n_s), dtype=np.int64),
        )

    def reward_estimate(self) -> np.ndarray:
        """Mean realized reward per (s, a); 0 where never visited."""
        visited = self.visit_count > 0
        r_hat = np.zeros_like(self.reward_sum)
        r_hat[visited] = self.reward_sum[visited] / self.visit_count[visited]
        return r_hat

    def transition_estimate(self) -> np.ndarray:
        """Empirical next-state law per (s, a); uniform where never visited."""
        n_states = self.transition_count.shape[2]
        p_hat = np.full_like(self.transition_count, 1.0 / n_states, dtype=np.float64)
        visited = self.visit_count > 0
        p_hat[visited] = self.transition_count[visited] / self.visit_count[visited][:, None]
        return p_hat


def observe(est: ModelEstimates, s: int, a: int, realized_reward: float, s_next: int) -> ModelEstimates:
    """Fold one (s, a, reward, s') realization into the running estimates."""
    if not np.isfinite(realized_reward):
        raise ValueError(f"realized reward at ({s},{a}) is not finite: {realized_reward}")
    est.visit_count[s, a] += 1
    est.transition_count[s, a, s_next] += 1
    est.reward_sum[s, a] += realized_reward
    return est


def estimated_q_update(est: ModelEstimates, v: np.ndarray, gamma: float) -> np.ndarray:
    """One-step backup using r-hat and p-hat in place of the true model."""
    v = np.asarray(v, dtype=np.float64)
    return est.reward_estimate() + gamma * (est.transition_estimate() @ v)


def run_dynamics_model_free(
    game: MarkovGame,
    schedule: RoundSchedule,
    scheme: UpdateScheme,
    tau: float,
    rng: np.random.Generator,
    hooks: Iterable[Hook] = (),
    *,
    reward_noise: float = 0.0,
    initial_state: int | None = None,
    first_visit: tuple[int, ...] | None = None,
) -> RunRecord:
    """Run the dynamics without model knowledge.

    The true game only generates transitions and (optionally noisy) reward
    realizations; every stage is folded into a ModelEstimates instance and
    the between-round backup uses the estimates. The returned record carries
    the final estimates in its `model` field.
    """
    estimates = RoundEstimates.initial(game, model_free=True)
    model = ModelEstimates.zeros(game)
    return _run_loop(
        game,
        schedule,
        scheme,
        tau,
        rng,
        hooks,
        initial_state,
        q_updater=lambda v: estimated_q_update(model, v, game.discount),
        estimates=estimates,
        model=model,
        reward_noise=reward_noise,
        first_visit=first_visit,
    )
