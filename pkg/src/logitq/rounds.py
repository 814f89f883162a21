"""Play-in-rounds engine: repeated stage play plus between-round value updates.

Q and v estimates are frozen within a round; at the round boundary the value
estimate is recomputed from the round's visit counters (empirical average or
most-frequent-profile payoff) and the Q estimate is rebuilt by the one-step
backup. Counters reset every round, the latest-action state and the current
state carry across rounds, and round lengths grow so the within-round chains
approach their stationary laws.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np

from ._engine import logit_tables, simulate_stages
from .dynamics import StagePlayState
from .game import ConfigError, MarkovGame
from .solver import logit_distribution

if TYPE_CHECKING:
    from .estimation import ModelEstimates


class UpdateScheme(enum.Enum):
    AVERAGE = "ave"
    MOST_FREQUENT = "freq"


@dataclass(frozen=True)
class RoundSchedule:
    """Round lengths: base_length * n^2 by default, optionally overriding
    round 1 (e.g. a long exploration round) or the whole growth rule."""

    total_rounds: int
    base_length: int = 100
    first_round_length: int | None = None
    growth: Callable[[int], int] | None = None

    def __post_init__(self):
        if self.total_rounds < 1:
            raise ConfigError(f"total_rounds must be positive, got {self.total_rounds}")
        if self.base_length < 1:
            raise ConfigError(f"base_length must be positive, got {self.base_length}")
        if self.first_round_length is not None and self.first_round_length < 1:
            raise ConfigError(f"first_round_length must be positive, got {self.first_round_length}")

    def length(self, n: int) -> int:
        """Stages in round n (1-indexed)."""
        if n == 1 and self.first_round_length is not None:
            return self.first_round_length
        if self.growth is not None:
            length = int(self.growth(n))
            if length < 1:
                raise ConfigError(f"growth rule returned non-positive length {length} for round {n}")
            return length
        return self.base_length * n * n

    def lengths(self) -> list[int]:
        return [self.length(n) for n in range(1, self.total_rounds + 1)]


@dataclass
class RoundEstimates:
    """Frozen Q and carried v for the current round, plus its visit counters."""

    q: np.ndarray  # (n_states, n_joint_actions)
    v: np.ndarray  # (n_states,)
    c_state: np.ndarray  # (n_states,) int64
    c_profile: np.ndarray  # (n_states, n_joint_actions) int64
    round_index: int = 1

    @classmethod
    def initial(cls, game: MarkovGame, model_free: bool = False) -> "RoundEstimates":
        """Q = r and v = per-state max of r with a known model; zeros without."""
        if model_free:
            q = np.zeros((game.n_states, game.n_joint_actions))
            v = np.zeros(game.n_states)
        else:
            q = game.reward.copy()
            v = game.reward.max(axis=1)
        return cls(
            q=q,
            v=v,
            c_state=np.zeros(game.n_states, dtype=np.int64),
            c_profile=np.zeros((game.n_states, game.n_joint_actions), dtype=np.int64),
        )

    def reset_counters(self) -> None:
        self.c_state[:] = 0
        self.c_profile[:] = 0


def run_round(
    game: MarkovGame,
    estimates: RoundEstimates,
    play: StagePlayState,
    length: int,
    s_init: int,
    tau: float,
    rng: np.random.Generator,
    *,
    model: "ModelEstimates | None" = None,
    reward_noise: float = 0.0,
    record_states: bool = False,
    first_visit: tuple[int, ...] | None = None,
    _cum_next: np.ndarray | None = None,
    _pi_tables: np.ndarray | None = None,
) -> tuple[int, np.ndarray | None]:
    """Simulate one round of `length` stages starting from s_init.

    Mutates estimates.c_state / estimates.c_profile and the play state in
    place; estimates.q is never written. When `model` is given, every stage's
    (s, a, realized reward, s') observation is accumulated into it, with an
    optional bounded uniform reward perturbation of half-width reward_noise.
    `first_visit` fixes the profile played at first visits (uniform random
    when None). Returns (final state, visited-state trace or None).
    """
    if length < 1:
        raise ConfigError(f"round length must be positive, got {length}")
    if not 0 <= s_init < game.n_states:
        raise IndexError(f"initial state {s_init} out of range [0, {game.n_states})")
    if tau <= 0.0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if _cum_next is None:
        _cum_next = np.cumsum(game.transition, axis=2)
    if _pi_tables is None:
        _pi_tables = logit_tables(estimates.q, game.action_counts, tau)
    alpha_flat = np.where(
        play.initialized,
        np.ravel_multi_index(play.alpha.T, game.action_counts, mode="clip"),
        -1,
    ).astype(np.int64)
    model_arrays = None
    if model is not None:
        model_arrays = (model.reward_sum, model.visit_count, model.transition_count)
    final, trace = simulate_stages(
        game,
        _pi_tables,
        _cum_next,
        alpha_flat,
        estimates.c_state,
        estimates.c_profile,
        int(s_init),
        int(length),
        rng,
        model_arrays=model_arrays,
        noise_amp=reward_noise,
        record_trace=record_states,
        first_visit=first_visit,
    )
    visited = alpha_flat >= 0
    play.initialized[:] = visited
    if visited.any():
        decoded = np.unravel_index(alpha_flat[visited], game.action_counts)
        play.alpha[visited] = np.stack(decoded, axis=1)
    return final, trace


def v_average(estimates: RoundEstimates) -> np.ndarray:
    """Counter-weighted average of the round's Q over played profiles.

    States not visited this round keep their previous value estimate.
    """
    v = estimates.v.copy()
    visited = estimates.c_state > 0
    weighted = (estimates.c_profile * estimates.q).sum(axis=1)
    v[visited] = weighted[visited] / estimates.c_state[visited]
    return v


def v_most_frequent(estimates: RoundEstimates) -> np.ndarray:
    """Q value of the round's most-played profile, averaging over count ties.

    States not visited this round keep their previous value estimate.
    """
    v = estimates.v.copy()
    for s in np.flatnonzero(estimates.c_state > 0):
        counts = estimates.c_profile[s]
        ties = counts == counts.max()
        v[s] = estimates.q[s, ties].mean()
    return v


def q_update(game: MarkovGame, v: np.ndarray) -> np.ndarray:
    """One-step backup of a value estimate: r(s,a) + gamma * E[v(s')]."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (game.n_states,):
        raise ValueError(f"v shape {v.shape} != ({game.n_states},)")
    return game.reward + game.discount * (game.transition @ v)


def sampled_frequency(estimates: RoundEstimates) -> dict[int, np.ndarray]:
    """Within-round empirical distribution of joint actions per visited state."""
    eta: dict[int, np.ndarray] = {}
    for s in np.flatnonzero(estimates.c_state > 0):
        eta[int(s)] = estimates.c_profile[s] / estimates.c_state[s]
    return eta


@dataclass(frozen=True)
class RoundSnapshot:
    """Per-round view handed to hooks; Q is the round's frozen tensor."""

    round_index: int
    q: np.ndarray
    v: np.ndarray
    eta: dict[int, np.ndarray]
    wall_clock: float
    stage_count: int  # cumulative stages through this round
    c_state: np.ndarray
    c_profile: np.ndarray


@dataclass(frozen=True)
class RoundRow:
    round_index: int
    stage_count: int  # cumulative stages through this round
    v: np.ndarray
    tracking_error: np.ndarray  # v - max_a Q, per state
    eta_tv_gap: np.ndarray  # TV(eta, softmax(Q/tau)) per state; NaN if unvisited


@dataclass
class RunRecord:
    """Per-round trajectory of one seeded run."""

    scheme: UpdateScheme
    tau: float
    rows: list[RoundRow] = field(default_factory=list)
    final_q: np.ndarray | None = None
    final_state: int = -1
    wall_clock_s: float = 0.0
    model: "ModelEstimates | None" = None


Hook = Callable[[RoundSnapshot], None]


def _scheme_fn(scheme: UpdateScheme) -> Callable[[RoundEstimates], np.ndarray]:
    return v_average if scheme is UpdateScheme.AVERAGE else v_most_frequent


def _run_loop(
    game: MarkovGame,
    schedule: RoundSchedule,
    scheme: UpdateScheme,
    tau: float,
    rng: np.random.Generator,
    hooks: Iterable[Hook],
    initial_state: int | None,
    q_updater: Callable[[np.ndarray], np.ndarray],
    estimates: RoundEstimates,
    model: "ModelEstimates | None",
    reward_noise: float,
    first_visit: tuple[int, ...] | None = None,
) -> RunRecord:
    scheme_fn = _scheme_fn(scheme)
    play = StagePlayState.fresh(game)
    cum_next = np.cumsum(game.transition, axis=2)
    s = int(rng.integers(game.n_states)) if initial_state is None else int(initial_state)
    record = RunRecord(scheme=scheme, tau=tau)
    hooks = tuple(hooks)
    t0 = time.perf_counter()
    cumulative = 0
    for n in range(1, schedule.total_rounds + 1):
        length = schedule.length(n)
        s, _ = run_round(
            game,
            estimates,
            play,
            length,
            s,
            tau,
            rng,
            model=model,
            reward_noise=reward_noise,
            first_visit=first_visit,
            _cum_next=cum_next,
        )
        cumulative += length
        v_new = scheme_fn(estimates)
        eta = sampled_frequency(estimates)
        eta_tv = np.full(game.n_states, np.nan)
        for st, freq in eta.items():
            mu = logit_distribution(estimates.q[st], tau)
            eta_tv[st] = 0.5 * np.abs(freq - mu).sum()
        tracking = v_new - estimates.q.max(axis=1)
        elapsed = time.perf_counter() - t0
        snapshot = RoundSnapshot(
            round_index=n,
            q=estimates.q,
            v=v_new,
            eta=eta,
            wall_clock=elapsed,
            stage_count=cumulative,
            c_state=estimates.c_state.copy(),
            c_profile=estimates.c_profile.copy(),
        )
        for hook in hooks:
            hook(snapshot)
        record.rows.append(
            RoundRow(
                round_index=n,
                stage_count=cumulative,
                v=v_new,
                tracking_error=tracking,
                eta_tv_gap=eta_tv,
            )
        )
        if n == schedule.total_rounds:
            record.final_q = estimates.q
        estimates.v = v_new
        estimates.q = q_updater(v_new)
        estimates.round_index = n + 1
        estimates.reset_counters()
    record.final_state = s
    record.wall_clock_s = time.perf_counter() - t0
    record.model = model
    return record


def run_dynamics(
    game: MarkovGame,
    schedule: RoundSchedule,
    scheme: UpdateScheme,
    tau: float,
    rng: np.random.Generator,
    hooks: Iterable[Hook] = (),
    *,
    initial_state: int | None = None,
    first_visit: tuple[int, ...] | None = None,
) -> RunRecord:
    """Run the known-model dynamics end to end: Q starts at r, each round is
    simulated with Q frozen, then v is recomputed per the scheme and Q is
    rebuilt by the exact one-step backup."""
    estimates = RoundEstimates.initial(game, model_free=False)
    return _run_loop(
        game,
        schedule,
        scheme,
        tau,
        rng,
        hooks,
        initial_state,
        q_updater=lambda v: q_update(game, v),
        estimates=estimates,
        model=None,
        reward_noise=0.0,
        first_visit=first_visit,
    )
