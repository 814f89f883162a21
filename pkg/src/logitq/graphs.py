"""Recurrence structure of the state graph, plus a raised-graph projection oracle.

The state graph has an edge s -> s' whenever some joint action moves s to s'
with positive probability. Recurrent classes are its closed strongly
connected components. The raised graph lifts states to (state, stationary
pure profile) pairs, where play updates at most one agent's action at the
current state per step; on tiny instances its recurrent classes must project
onto exactly the recurrent classes of the state graph, which gives an
exhaustive oracle for the trajectory-absorption property of the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .game import MarkovGame, joint_action_strides

RAISED_VERTEX_CAP = 10**6


class SizeCapExceeded(RuntimeError):
    """Raised when a raised graph would exceed the configured vertex cap."""


@dataclass(frozen=True)
class StateGraph:
    n_vertices: int
    adjacency: np.ndarray  # bool (n, n); adjacency[u, v] iff edge u -> v


@dataclass(frozen=True)
class RaisedGraph:
    """Graph over (state, per-state joint-action assignment) vertices.

    Vertex index = state * n_joint^n_states + sum_t assignment[t] * n_joint^t.
    """

    n_states: int
    n_joint_actions: int
    n_vertices: int
    edge_src: np.ndarray
    edge_dst: np.ndarray

    def decode_vertex(self, w: int) -> tuple[int, tuple[int, ...]]:
        n_assign = self.n_joint_actions ** self.n_states
        s, rest = divmod(int(w), n_assign)
        assignment = []
        for _ in range(self.n_states):
            rest, digit = divmod(rest, self.n_joint_actions)
            assignment.append(digit)
        return s, tuple(assignment)


def build_state_graph(game: MarkovGame) -> StateGraph:
    """Edge s -> s' iff max over joint actions of p(s' | s, a) is positive."""
    adjacency = game.transition.max(axis=1) > 0.0
    return StateGraph(game.n_states, adjacency)


def _closed_sccs(n_vertices: int, src: np.ndarray, dst: np.ndarray) -> list[set[int]]:
    """Strongly connected components with no outgoing edges, sorted by min vertex."""
    data = np.ones(len(src), dtype=np.int8)
    graph = csr_matrix((data, (src, dst)), shape=(n_vertices, n_vertices))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    closed = np.ones(n_comp, dtype=bool)
    leaving = labels[src] != labels[dst]
    closed[labels[src[leaving]]] = False
    classes = [set(np.flatnonzero(labels == c).tolist()) for c in range(n_comp) if closed[c]]
    return sorted(classes, key=min)


def recurrent_classes(g: StateGraph) -> list[set[int]]:
    """The closed strongly connected components of g; all other states are transient."""
    src, dst = np.nonzero(g.adjacency)
    return _closed_sccs(g.n_vertices, src, dst)


def transient_states(g: StateGraph) -> set[int]:
    recurrent: set[int] = set().union(*recurrent_classes(g))
    return set(range(g.n_vertices)) - recurrent


def build_raised_graph(game: MarkovGame, cap: int = RAISED_VERTEX_CAP) -> RaisedGraph:
    """Enumerate the raised graph; intended for tiny instances only.

    From vertex (s, assignment) the profile played at s may differ from
    assignment[s] in at most one agent's coordinate (including a re-draw of
    the same action); the successor vertex carries the played profile at s
    and any state s' with positive transition probability.
    """
    n_s, n_j = game.n_states, game.n_joint_actions
    n_assign = n_j**n_s
    n_vertices = n_s * n_assign
    if n_vertices > cap:
        raise SizeCapExceeded(f"raised graph needs {n_vertices} vertices, cap is {cap}")

    strides = joint_action_strides(game.action_counts)
    counts = game.action_counts
    positive = game.transition > 0.0

    # playable[a] = flat profiles reachable from a by changing at most one coordinate
    playable: list[np.ndarray] = []
    for a in range(n_j):
        options = {a}
        for i in range(game.n_agents):
            a_i = (a // strides[i]) % counts[i]
            base = a - a_i * strides[i]
            options.update(base + k * strides[i] for k in range(counts[i]))
        playable.append(np.array(sorted(options), dtype=np.int64))

    assign_weight = np.array([n_j**t for t in range(n_s)], dtype=np.int64)
    src: list[int] = []
    dst: list[int] = []
    for w in range(n_vertices):
        s, rest = divmod(w, n_assign)
        a_cur = (rest // assign_weight[s]) % n_j
        for a_new in playable[a_cur]:
            rest_new = rest + (int(a_new) - int(a_cur)) * int(assign_weight[s])
            for s_next in np.flatnonzero(positive[s, a_new]):
                src.append(w)
                dst.append(int(s_next) * n_assign + rest_new)
    return RaisedGraph(
        n_states=n_s,
        n_joint_actions=n_j,
        n_vertices=n_vertices,
        edge_src=np.array(src, dtype=np.int64),
        edge_dst=np.array(dst, dtype=np.int64),
    )


def check_projection(game: MarkovGame, cap: int = RAISED_VERTEX_CAP) -> bool:
    """True iff raised-graph recurrent classes project onto exactly the
    recurrent classes of the state graph.

    Every recurrent class of the raised graph must project (by taking the
    original state of each vertex) to a recurrent class of the state graph,
    and every recurrent class of the state graph must arise this way. Several
    raised classes may share one projection when the game has transient
    states, since action assignments at never-visited states stay frozen.
    """
    raised = build_raised_graph(game, cap=cap)
    g_classes = {frozenset(c) for c in recurrent_classes(build_state_graph(game))}
    n_assign = raised.n_joint_actions**raised.n_states
    projections = set()
    for w_class in _closed_sccs(raised.n_vertices, raised.edge_src, raised.edge_dst):
        projections.add(frozenset(w // n_assign for w in w_class))
    return projections == g_classes
