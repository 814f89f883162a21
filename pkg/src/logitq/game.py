"""Finite identical-interest Markov games: representation, validation, generation, I/O.

Joint actions use a fixed mixed-radix flat encoding with agent 0 most
significant (C order over the per-agent action axes). All tensors are
float64 numpy arrays; `reward` has shape (n_states, n_joint_actions) and
`transition` has shape (n_states, n_joint_actions, n_states).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12


class ConfigError(ValueError):
    """Degenerate or inconsistent configuration values."""


def encode_joint_action(components, action_counts) -> int:
    """Flat index of a per-agent action tuple (agent 0 most significant)."""
    return int(np.ravel_multi_index(tuple(int(c) for c in components), tuple(action_counts)))


def decode_joint_action(index, action_counts) -> tuple[int, ...]:
    """Per-agent action tuple for a flat joint-action index."""
    return tuple(int(c) for c in np.unravel_index(int(index), tuple(action_counts)))


def joint_action_strides(action_counts) -> tuple[int, ...]:
    """Mixed-radix strides matching encode_joint_action."""
    n = len(action_counts)
    strides = [1] * n
    for i in range(n - 2, -1, -1):
        strides[i] = strides[i + 1] * int(action_counts[i + 1])
    return tuple(strides)


@dataclass(frozen=True)
class MarkovGame:
    """An n-agent identical-interest Markov game.

    Immutable after construction: the reward and transition arrays are
    marked read-only, so instances are safe to share across threads.
    """

    n_agents: int
    n_states: int
    action_counts: tuple[int, ...]
    reward: np.ndarray
    transition: np.ndarray
    discount: float

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(c) for c in self.action_counts))
        reward = np.ascontiguousarray(np.asarray(self.reward, dtype=np.float64))
        transition = np.ascontiguousarray(np.asarray(self.transition, dtype=np.float64))
        reward.setflags(write=False)
        transition.setflags(write=False)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "transition", transition)

    @property
    def n_joint_actions(self) -> int:
        return int(math.prod(self.action_counts))

    @property
    def strides(self) -> tuple[int, ...]:
        return joint_action_strides(self.action_counts)

    def encode_action(self, components) -> int:
        return encode_joint_action(components, self.action_counts)

    def decode_action(self, index) -> tuple[int, ...]:
        return decode_joint_action(index, self.action_counts)


def validate(game: MarkovGame) -> list[str]:
    """Return a list of invariant violations; empty iff the game is valid.

    Each violation names the offending index so failures are actionable.
    """
    violations: list[str] = []
    if game.n_agents < 1:
        violations.append(f"n_agents must be positive, got {game.n_agents}")
    if game.n_states < 1:
        violations.append(f"n_states must be positive, got {game.n_states}")
    if len(game.action_counts) != game.n_agents:
        violations.append(
            f"action_counts has {len(game.action_counts)} entries for {game.n_agents} agents"
        )
    for i, c in enumerate(game.action_counts):
        if c < 1:
            violations.append(f"action count for agent {i} must be positive, got {c}")
    if not 0.0 <= game.discount < 1.0:
        violations.append(f"discount out of range [0, 1): got {game.discount}")
    if violations:
        return violations

    n_s, n_j = game.n_states, game.n_joint_actions
    if game.reward.shape != (n_s, n_j):
        violations.append(f"reward shape {game.reward.shape} != ({n_s}, {n_j})")
    if game.transition.shape != (n_s, n_j, n_s):
        violations.append(f"transition shape {game.transition.shape} != ({n_s}, {n_j}, {n_s})")
    if violations:
        return violations

    for s, a in np.argwhere(~np.isfinite(game.reward)):
        violations.append(f"reward({s},{a}) is not finite")
    bad = (game.transition < 0.0) | (game.transition > 1.0) | ~np.isfinite(game.transition)
    for s, a, t in np.argwhere(bad):
        violations.append(f"transition({s},{a},{t}) outside [0, 1]: {game.transition[s, a, t]}")
    row_sums = game.transition.sum(axis=2)
    for s, a in np.argwhere(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        violations.append(f"transition row ({s},{a}) sums to {row_sums[s, a]}, expected 1")
    return violations


def sample_next_state(game: MarkovGame, s: int, a, rng: np.random.Generator) -> int:
    """Draw the successor state of (s, a) from the transition kernel."""
    if not 0 <= s < game.n_states:
        raise IndexError(f"state {s} out of range [0, {game.n_states})")
    a_flat = int(a) if isinstance(a, (int, np.integer)) else game.encode_action(a)
    if not 0 <= a_flat < game.n_joint_actions:
        raise IndexError(f"joint action {a_flat} out of range [0, {game.n_joint_actions})")
    row = game.transition[s, a_flat]
    u = rng.random()
    acc = 0.0
    for t in range(game.n_states - 1):
        acc += row[t]
        if u < acc:
            return t
    return game.n_states - 1


@dataclass(frozen=True)
class GameGenConfig:
    """Random-game recipe: uniform kernels on [lo, hi] and state-scaled rewards.

    `n_actions` is either a single count shared by all agents or one count
    per agent. The transition range's lower bound must be positive so the
    state graph of a generated game is fully connected.
    """

    n_states: int
    n_agents: int
    n_actions: int | tuple[int, ...]
    discount: float
    transition_range: tuple[float, float] = (0.2, 1.0)
    seed: int | None = None

    def action_counts(self) -> tuple[int, ...]:
        if isinstance(self.n_actions, int):
            return (self.n_actions,) * self.n_agents
        return tuple(int(c) for c in self.n_actions)


def generate_random_game(cfg: GameGenConfig, rng: np.random.Generator | None = None) -> MarkovGame:
    """Generate a random game per cfg.

    Transition entries are drawn uniformly from the configured range and
    normalized per (state, joint-action) row. Rewards are drawn uniformly
    from [0, 1], scaled by (state index + 1)^2 so states have distinct value
    scales, then normalized by the global max so max |r| is exactly 1.
    """
    if cfg.n_states < 1 or cfg.n_agents < 1:
        raise ConfigError(f"need at least one state and one agent, got {cfg.n_states}, {cfg.n_agents}")
    counts = cfg.action_counts()
    if len(counts) != cfg.n_agents or any(c < 1 for c in counts):
        raise ConfigError(f"invalid per-agent action counts {counts}")
    lo, hi = cfg.transition_range
    if not 0.0 < lo <= hi:
        raise ConfigError(f"transition range lower bound must be positive, got [{lo}, {hi}]")
    if not 0.0 <= cfg.discount < 1.0:
        raise ConfigError(f"discount out of range [0, 1): got {cfg.discount}")

    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n_s = cfg.n_states
    n_j = int(math.prod(counts))

    transition = rng.uniform(lo, hi, size=(n_s, n_j, n_s))
    transition /= transition.sum(axis=2, keepdims=True)

    reward = rng.uniform(0.0, 1.0, size=(n_s, n_j))
    reward *= (np.arange(1, n_s + 1, dtype=np.float64) ** 2)[:, None]
    reward /= np.abs(reward).max()

    return MarkovGame(
        n_agents=cfg.n_agents,
        n_states=n_s,
        action_counts=counts,
        reward=reward,
        transition=transition,
        discount=float(cfg.discount),
    )


def save_game(game: MarkovGame, path: str | Path) -> None:
    """Write a game as JSON (reward nested [state][joint], transition [state][joint][next])."""
    doc = {
        "n_agents": game.n_agents,
        "n_states": game.n_states,
        "action_counts": list(game.action_counts),
        "discount": game.discount,
        "reward": game.reward.tolist(),
        "transition": game.transition.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_game(path: str | Path) -> MarkovGame:
    """Load a game from JSON, rejecting documents that violate invariants."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    missing = [k for k in ("n_agents", "n_states", "action_counts", "discount", "reward", "transition") if k not in doc]
    if missing:
        raise ConfigError(f"{path}: missing fields {missing}")
    try:
        game = MarkovGame(
            n_agents=int(doc["n_agents"]),
            n_states=int(doc["n_states"]),
            action_counts=tuple(int(c) for c in doc["action_counts"]),
            reward=np.asarray(doc["reward"], dtype=np.float64),
            transition=np.asarray(doc["transition"], dtype=np.float64),
            discount=float(doc["discount"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed game document: {exc}") from exc
    violations = validate(game)
    if violations:
        raise ConfigError(f"{path}: invalid game: " + "; ".join(violations))
    return game
