"""Within-round log-linear stage play and its Markov-chain machinery.

At each stage one uniformly chosen agent soft-max-responds (temperature tau)
to the other agents' latest actions at the current state; everyone else
repeats their latest action. With the Q-function frozen, the sequence of
joint actions played at a fixed state is an irreducible aperiodic Markov
chain whose unique stationary law is the softmax of Q(s, .) / tau; both the
transition matrix and that closed form are implemented so tests can verify
one against the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import ConfigError, MarkovGame, joint_action_strides
from .graphs import SizeCapExceeded
from .solver import logit_distribution

JOINT_ACTION_CAP = 4096


@dataclass(frozen=True)
class DynamicsConfig:
    """Temperature and first-visit rule for the stage play.

    first_visit is None for a uniform random joint profile at each state's
    first visit, or a fixed per-agent profile played at every first visit.
    """

    tau: float
    first_visit: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.first_visit is not None:
            object.__setattr__(self, "first_visit", tuple(int(c) for c in self.first_visit))


@dataclass
class StagePlayState:
    """Latest joint action per state, plus which states have been played."""

    alpha: np.ndarray  # (n_states, n_agents) int64
    initialized: np.ndarray  # (n_states,) bool

    @classmethod
    def fresh(cls, game: MarkovGame) -> "StagePlayState":
        return cls(
            alpha=np.zeros((game.n_states, game.n_agents), dtype=np.int64),
            initialized=np.zeros(game.n_states, dtype=bool),
        )


def logit_response(
    game: MarkovGame,
    q: np.ndarray,
    s: int,
    agent: int,
    alpha: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Soft-max response of one agent against the others' latest actions.

    alpha holds the per-agent latest actions at state s; the entry for
    `agent` is ignored. Returns a strictly positive distribution over the
    agent's own actions.
    """
    strides = joint_action_strides(game.action_counts)
    base = sum(int(alpha[j]) * strides[j] for j in range(game.n_agents) if j != agent)
    flats = base + np.arange(game.action_counts[agent]) * strides[agent]
    return logit_distribution(q[s, flats], tau)


def step_stage_game(
    game: MarkovGame,
    q: np.ndarray,
    s: int,
    play: StagePlayState,
    tau: float,
    rng: np.random.Generator,
    first_visit: tuple[int, ...] | None = None,
) -> int:
    """Play one stage of the log-linear dynamics at state s.

    On the state's first visit, the joint profile `first_visit` (uniform
    random when None) is played and recorded. Afterwards, one agent picked
    uniformly at random re-draws its action from logit_response while the
    others repeat; consecutive profiles therefore differ in at most one
    agent's component. Returns the flat joint-action index played (which is
    also the new alpha at s).
    """
    if not play.initialized[s]:
        if first_visit is not None:
            play.alpha[s] = np.asarray(first_visit, dtype=np.int64)
        else:
            for j in range(game.n_agents):
                play.alpha[s, j] = rng.integers(game.action_counts[j])
        play.initialized[s] = True
        return game.encode_action(play.alpha[s])
    agent = int(rng.integers(game.n_agents))
    probs = logit_response(game, q, s, agent, play.alpha[s], tau)
    u = rng.random()
    acc = 0.0
    pick = game.action_counts[agent] - 1
    for k in range(game.action_counts[agent]):
        acc += probs[k]
        if u < acc:
            pick = k
            break
    play.alpha[s, agent] = pick
    return game.encode_action(play.alpha[s])


def transition_matrix(
    game: MarkovGame,
    q: np.ndarray,
    s: int,
    tau: float,
    cap: int = JOINT_ACTION_CAP,
) -> np.ndarray:
    """Joint-action chain of the stage game at state s under frozen Q.

    P[a, a'] sums (1/n) * pi_i(a'_i | a_-i) over the agents i consistent with
    a' (that is, a'_{-i} = a_{-i}); the self-transition collects every
    agent's probability of re-drawing its current action. Rows sum to 1.
    """
    n_j = game.n_joint_actions
    if n_j > cap:
        raise SizeCapExceeded(f"{n_j} joint actions exceed cap {cap}")
    strides = joint_action_strides(game.action_counts)
    p = np.zeros((n_j, n_j))
    weight = 1.0 / game.n_agents
    for i in range(game.n_agents):
        count = game.action_counts[i]
        for a in range(n_j):
            a_i = (a // strides[i]) % count
            base = a - a_i * strides[i]
            flats = base + np.arange(count) * strides[i]
            p[a, flats] += weight * logit_distribution(q[s, flats], tau)
    return p


def stationary_closed_form(q: np.ndarray, s: int, tau: float) -> np.ndarray:
    """Closed-form stationary law of the stage chain: softmax of Q(s, .) / tau."""
    return logit_distribution(q[s], tau)


def stationary_brute_force(p: np.ndarray) -> np.ndarray:
    """Left fixed vector of a row-stochastic matrix by direct linear solve.

    Solves mu (P - I) = 0 with the normalization sum(mu) = 1 substituted for
    one equation; verifies the residual to 1e-12.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(a, b)
    residual = float(np.abs(mu @ p - mu).max())
    if residual > 1e-12:
        raise ValueError(f"stationary solve residual {residual:.3e} exceeds 1e-12")
    return mu
