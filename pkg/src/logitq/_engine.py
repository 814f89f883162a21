"""Compiled stage loop shared by all simulation entry points.

The hot path consumes pre-drawn uniform arrays instead of calling the
generator per stage; a round is therefore a pure function of its inputs and
the trajectory is bit-reproducible for a fixed seed. Logit responses are
table lookups because Q is frozen within a round: pi_tables[i, s, flat] is
the probability that agent i, re-drawing against the others' actions encoded
in `flat`, plays its own coordinate of `flat`.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EMPTY_F1 = np.zeros(0, dtype=np.float64)
_EMPTY_I1 = np.zeros(0, dtype=np.int64)
_EMPTY_F2 = np.zeros((0, 0), dtype=np.float64)
_EMPTY_I2 = np.zeros((0, 0), dtype=np.int64)
_EMPTY_I3 = np.zeros((0, 0, 0), dtype=np.int64)


def logit_tables(q: np.ndarray, action_counts, tau: float) -> np.ndarray:
    """Per-agent softmax slices of Q / tau, flattened back to joint indexing."""
    n_states, n_joint = q.shape
    shaped = (q / tau).reshape((n_states,) + tuple(action_counts))
    out = np.empty((len(action_counts), n_states, n_joint))
    for i in range(len(action_counts)):
        axis = i + 1
        z = shaped - shaped.max(axis=axis, keepdims=True)
        e = np.exp(z)
        out[i] = (e / e.sum(axis=axis, keepdims=True)).reshape(n_states, n_joint)
    return out


@njit(cache=True, nogil=True)
def _simulate_stages(
    n_agents,
    strides,
    action_counts,
    pi_tables,
    cum_next,
    reward,
    alpha_flat,
    c_state,
    c_profile,
    s0,
    first_profiles,
    u_agent,
    u_act,
    u_next,
    u_noise,
    noise_amp,
    observe_model,
    reward_sum,
    visit_count,
    trans_count,
    state_trace,
    record_trace,
):
    n_states = c_state.shape[0]
    length = u_agent.shape[0]
    s = s0
    for l in range(length):
        a = alpha_flat[s]
        if a < 0:
            a = first_profiles[s]
        else:
            i = int(u_agent[l] * n_agents)
            if i >= n_agents:
                i = n_agents - 1
            a_i = (a // strides[i]) % action_counts[i]
            base = a - a_i * strides[i]
            u = u_act[l]
            acc = 0.0
            pick = action_counts[i] - 1
            for k in range(action_counts[i]):
                acc += pi_tables[i, s, base + k * strides[i]]
                if u < acc:
                    pick = k
                    break
            a = base + pick * strides[i]
        alpha_flat[s] = a
        c_state[s] += 1
        c_profile[s, a] += 1
        if record_trace:
            state_trace[l] = s

        u = u_next[l]
        s_next = n_states - 1
        for k in range(n_states):
            if u < cum_next[s, a, k]:
                s_next = k
                break

        if observe_model:
            r = reward[s, a]
            if noise_amp > 0.0:
                r += noise_amp * (2.0 * u_noise[l] - 1.0)
            reward_sum[s, a] += r
            visit_count[s, a] += 1
            trans_count[s, a, s_next] += 1
        s = s_next
    return s


def first_visit_profiles(game, rng: np.random.Generator, fixed=None) -> np.ndarray:
    """Flat profile played at each state's first visit: the fixed one when
    configured, otherwise an independent uniform draw per state."""
    if fixed is not None:
        flat = int(np.ravel_multi_index(tuple(int(c) for c in fixed), game.action_counts))
        return np.full(game.n_states, flat, dtype=np.int64)
    u = rng.random((game.n_states, game.n_agents))
    counts = np.asarray(game.action_counts)
    components = np.minimum((u * counts).astype(np.int64), counts - 1)
    return np.ravel_multi_index(tuple(components.T), game.action_counts).astype(np.int64)


def simulate_stages(
    game,
    pi_tables: np.ndarray,
    cum_next: np.ndarray,
    alpha_flat: np.ndarray,
    c_state: np.ndarray,
    c_profile: np.ndarray,
    s0: int,
    length: int,
    rng: np.random.Generator,
    model_arrays: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    noise_amp: float = 0.0,
    record_trace: bool = False,
    first_visit=None,
) -> tuple[int, np.ndarray | None]:
    """Run `length` stages, mutating alpha and the counters in place.

    Draw order per call is fixed (first-visit profiles, then per-stage agent,
    action, next-state, and optionally noise uniforms), so a fixed generator
    state determines the trajectory exactly.
    """
    first_profiles = first_visit_profiles(game, rng, first_visit)
    u_agent = rng.random(length)
    u_act = rng.random(length)
    u_next = rng.random(length)
    observe = model_arrays is not None
    use_noise = observe and noise_amp > 0.0
    u_noise = rng.random(length) if use_noise else _EMPTY_F1
    reward_sum, visit_count, trans_count = model_arrays if observe else (
        _EMPTY_F2,
        _EMPTY_I2,
        _EMPTY_I3,
    )
    trace = np.zeros(length, dtype=np.int64) if record_trace else _EMPTY_I1
    final = _simulate_stages(
        game.n_agents,
        np.asarray(game.strides, dtype=np.int64),
        np.asarray(game.action_counts, dtype=np.int64),
        pi_tables,
        cum_next,
        game.reward,
        alpha_flat,
        c_state,
        c_profile,
        s0,
        first_profiles,
        u_agent,
        u_act,
        u_next,
        u_noise,
        float(noise_amp),
        observe,
        reward_sum,
        visit_count,
        trans_count,
        trace,
        record_trace,
    )
    return int(final), (trace if record_trace else None)
