"""Deviation metrics and theoretical bands computed from run snapshots.

With |A| joint actions, temperature tau and discount gamma, the limiting
bands are: bias of the stationary expectation against the max, in
[-tau*ln|A|, 0]; asymptotic v deviation under the averaging scheme, in
[-tau*ln|A|/(1-gamma), 0]; asymptotic Q deviation, in
[-tau*ln|A|*gamma/(1-gamma), 0]. The deviation envelope propagates measured
per-round tracking errors through the contraction recursion, giving hard
per-round bounds on the Q deviation for known-model runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rounds import RoundSnapshot
from .solver import ExactSolution


@dataclass(frozen=True)
class DiagnosticsRecord:
    round_index: int
    delta_v: np.ndarray  # v_n - v*, per state
    delta_q_sup: float  # sup-norm of Q_n - Q*
    delta_q_min: float  # signed min of Q_n - Q*
    delta_q_max: float  # signed max of Q_n - Q*
    tracking_error: np.ndarray  # v_n - max_a Q_n, per state
    bias_band: tuple[float, float]
    value_band: tuple[float, float]
    q_band: tuple[float, float]


def bias_band(tau: float, joint_action_count: int) -> tuple[float, float]:
    return (-tau * math.log(joint_action_count), 0.0)


def value_band(tau: float, gamma: float, joint_action_count: int) -> tuple[float, float]:
    return (-tau * math.log(joint_action_count) / (1.0 - gamma), 0.0)


def q_band(tau: float, gamma: float, joint_action_count: int) -> tuple[float, float]:
    return (-tau * math.log(joint_action_count) * gamma / (1.0 - gamma), 0.0)


def compute_diagnostics(
    snapshot: RoundSnapshot,
    exact: ExactSolution,
    tau: float,
    gamma: float,
    joint_action_count: int,
) -> DiagnosticsRecord:
    """Deviations of one round snapshot from the exact solution."""
    if snapshot.q.shape != exact.q_star.shape:
        raise ValueError(f"Q shape {snapshot.q.shape} != {exact.q_star.shape}")
    delta_q = snapshot.q - exact.q_star
    return DiagnosticsRecord(
        round_index=snapshot.round_index,
        delta_v=snapshot.v - exact.v_star,
        delta_q_sup=float(np.abs(delta_q).max()),
        delta_q_min=float(delta_q.min()),
        delta_q_max=float(delta_q.max()),
        tracking_error=snapshot.v - snapshot.q.max(axis=1),
        bias_band=bias_band(tau, joint_action_count),
        value_band=value_band(tau, gamma, joint_action_count),
        q_band=q_band(tau, gamma, joint_action_count),
    )


def deviation_envelope(
    tracking_history: Sequence[tuple[float, float]],
    gamma: float,
    q_bound: float,
    n: int | None = None,
) -> tuple[float, float]:
    """Bounds on the Q deviation after n rounds of measured tracking errors.

    tracking_history[m] is the (min, max) over states of the tracking error
    in update m (0-indexed: update m produces the Q played one round later).
    With |Q*| <= q_bound, the deviation of the Q produced after n updates
    lies in [-gamma^(n+1) * q_bound + sum_{m<n} gamma^(n-m) * min_m,
    +gamma^(n+1) * q_bound + sum_{m<n} gamma^(n-m) * max_m].
    """
    if n is None:
        n = len(tracking_history)
    if n > len(tracking_history):
        raise ValueError(f"history covers {len(tracking_history)} rounds, need {n}")
    lower = -(gamma ** (n + 1)) * q_bound
    upper = (gamma ** (n + 1)) * q_bound
    for m in range(n):
        e_min, e_max = tracking_history[m]
        lower += gamma ** (n - m) * e_min
        upper += gamma ** (n - m) * e_max
    return lower, upper


class DiagnosticsCollector:
    """Round hook that accumulates DiagnosticsRecords against a fixed oracle."""

    def __init__(self, exact: ExactSolution, tau: float, gamma: float, joint_action_count: int):
        self.exact = exact
        self.tau = tau
        self.gamma = gamma
        self.joint_action_count = joint_action_count
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, snapshot: RoundSnapshot) -> None:
        self.records.append(
            compute_diagnostics(snapshot, self.exact, self.tau, self.gamma, self.joint_action_count)
        )
