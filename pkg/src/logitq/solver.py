"""Ground-truth fixed points via value iteration on the joint-action Q-function.

The backup r(s,a) + gamma * sum_s' p(s'|s,a) * max_a' Q(s',a') is a sup-norm
contraction with modulus gamma, so iterating it from Q = r converges to the
unique optimal Q. The limiting logit distribution is the per-state softmax of
Q / tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import MarkovGame


class IterationLimitError(RuntimeError):
    """Value iteration hit max_iters; carries the last sup-norm change."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ExactSolution:
    v_star: np.ndarray  # (n_states,)
    q_star: np.ndarray  # (n_states, n_joint_actions)
    mu_star: np.ndarray  # (n_states, n_joint_actions), rows sum to 1
    residual: float  # sup-norm Bellman residual of q_star
    iterations: int


def bellman_backup(game: MarkovGame, q: np.ndarray) -> np.ndarray:
    """One sweep of r(s,a) + gamma * E[max_a' Q(s',a')]."""
    q = np.asarray(q, dtype=np.float64)
    expected = (game.n_states, game.n_joint_actions)
    if q.shape != expected:
        raise ValueError(f"Q shape {q.shape} != {expected}")
    v = q.max(axis=1)
    return game.reward + game.discount * (game.transition @ v)


def logit_distribution(q_row: np.ndarray, tau: float) -> np.ndarray:
    """Softmax of q_row / tau, computed with max-subtraction for overflow safety."""
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    q_row = np.asarray(q_row, dtype=np.float64)
    if not np.all(np.isfinite(q_row)):
        raise ValueError("logit_distribution requires finite entries")
    z = q_row / tau
    e = np.exp(z - z.max())
    return e / e.sum()


def solve(
    game: MarkovGame,
    tau: float = 1e-3,
    tol: float = 1e-10,
    max_iters: int = 100_000,
) -> ExactSolution:
    """Iterate bellman_backup from Q = r until the sup-norm distance to the
    fixed point is at most tol, then attach the limiting logit distribution.

    Stops when the per-sweep change drops below tol * (1 - gamma) / gamma,
    which bounds the remaining distance by tol via the contraction property.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    gamma = game.discount
    threshold = tol * (1.0 - gamma) / gamma if gamma > 0.0 else tol
    q = game.reward.copy()
    iterations = 0
    change = np.inf
    for iterations in range(1, max_iters + 1):
        q_next = bellman_backup(game, q)
        change = float(np.abs(q_next - q).max())
        q = q_next
        if change <= threshold:
            break
    else:
        raise IterationLimitError(
            f"no convergence in {max_iters} sweeps (last change {change:.3e})", residual=change
        )
    residual = float(np.abs(bellman_backup(game, q) - q).max())
    mu = np.vstack([logit_distribution(q[s], tau) for s in range(game.n_states)])
    return ExactSolution(
        v_star=q.max(axis=1),
        q_star=q,
        mu_star=mu,
        residual=residual,
        iterations=iterations,
    )
