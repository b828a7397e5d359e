"""Finite MDPs as explicit transition tensors, plus the named instances the
oracle and the estimator tests are built on."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RngState
from . import cliff as _cliff
from . import turf as _turf

ROW_TOL = 1e-12


@dataclass
class TabularMDP:
    P: np.ndarray    # (S, A, S) transition probabilities
    mu0: np.ndarray  # (S,) initial distribution

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.mu0 = np.asarray(self.mu0, dtype=np.float64)
        self.validate()

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    def validate(self) -> None:
        if self.P.ndim != 3 or self.P.shape[0] != self.P.shape[2]:
            raise ValueError("P must have shape (S, A, S)")
        if self.mu0.shape != (self.P.shape[0],):
            raise ValueError("mu0 length must match state count")
        if np.any(self.P < 0.0) or np.any(self.mu0 < 0.0):
            raise ValueError("probabilities must be nonnegative")
        row_sums = self.P.sum(axis=2)
        if np.any(np.abs(row_sums - 1.0) > ROW_TOL):
            worst = np.max(np.abs(row_sums - 1.0))
            raise ValueError(f"transition rows must sum to 1 (worst deviation {worst:.3e})")
        if abs(self.mu0.sum() - 1.0) > ROW_TOL:
            raise ValueError("mu0 must sum to 1")


def mdp_step(mdp: TabularMDP, s: int, a: int, rng: RngState) -> int:
    """Draw the next state from P[s, a, .]."""
    return int(rng.gen.choice(mdp.n_states, p=mdp.P[s, a]))


# ---------------------------------------------------------------------------
# Named instances
# ---------------------------------------------------------------------------

def three_cycle() -> TabularMDP:
    """Deterministic 0 -> 1 -> 2 -> 0 cycle, uniform start.

    Every one-step-ahead pair is favored at any finite horizon, so the
    'more likely to come first' relation runs in a circle.
    """
    P = np.zeros((3, 1, 3))
    for s in range(3):
        P[s, 0, (s + 1) % 3] = 1.0
    return TabularMDP(P=P, mu0=np.full(3, 1.0 / 3.0))


def one_way_chain(n: int) -> TabularMDP:
    """0 -> 1 -> ... -> n-1 with an absorbing last state; start at 0."""
    P = np.zeros((n, 1, n))
    for s in range(n - 1):
        P[s, 0, s + 1] = 1.0
    P[n - 1, 0, n - 1] = 1.0
    mu0 = np.zeros(n)
    mu0[0] = 1.0
    return TabularMDP(P=P, mu0=mu0)


def flip_flop() -> TabularMDP:
    """Two states alternating deterministically, uniform start."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = 1.0
    return TabularMDP(P=P, mu0=np.array([0.5, 0.5]))


def two_action_chain(n: int) -> TabularMDP:
    """Action 0 advances along a one-way chain, action 1 stays put."""
    P = np.zeros((n, 2, n))
    for s in range(n):
        P[s, 0, min(s + 1, n - 1)] = 1.0
        P[s, 1, s] = 1.0
    mu0 = np.zeros(n)
    mu0[0] = 1.0
    return TabularMDP(P=P, mu0=mu0)


def random_mdp(
    n_states: int,
    n_actions: int,
    rng: RngState,
    alpha: float = 1.0,
    random_start: bool = False,
) -> TabularMDP:
    """Dirichlet transition rows; uniform (or Dirichlet) start distribution."""
    P = rng.gen.dirichlet(np.full(n_states, alpha), size=(n_states, n_actions))
    if random_start:
        mu0 = rng.gen.dirichlet(np.full(n_states, alpha))
    else:
        mu0 = np.full(n_states, 1.0 / n_states)
    return TabularMDP(P=P, mu0=mu0)


def cliff_tabular(p_wind: float) -> TabularMDP:
    """The windy cliff walk as an explicit MDP.

    Alive cells are rows 0..4 of the 6x8 grid (40 states); one extra
    absorbing state represents having fallen. Transitions reproduce
    cliff_step exactly: clamped move, then wind toward the cliff.
    """
    rows = _cliff.CLIFF_ROW  # alive rows
    cols = _cliff.CLIFF_COLS
    n_alive = rows * cols
    dead = n_alive
    n = n_alive + 1
    P = np.zeros((n, 4, n))
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            for a, (dr, dc) in enumerate(_cliff.MOVES):
                nr = min(max(r + dr, 0), _cliff.CLIFF_ROWS - 1)
                nc = min(max(c + dc, 0), cols - 1)
                if nr == _cliff.CLIFF_ROW:
                    P[s, a, dead] += 1.0
                    continue
                wr = nr + 1
                if wr == _cliff.CLIFF_ROW:
                    P[s, a, dead] += p_wind
                else:
                    P[s, a, wr * cols + nc] += p_wind
                P[s, a, nr * cols + nc] += 1.0 - p_wind
    P[dead, :, dead] = 1.0
    mu0 = np.zeros(n)
    mu0[_cliff.START[0] * cols + _cliff.START[1]] = 1.0
    return TabularMDP(P=P, mu0=mu0)


def turf_tabular(map_text: str) -> tuple[TabularMDP, list, int]:
    """Enumerate a (small) turf map into an exact MDP.

    States are reachable (agent position, spoiled set) pairs plus one
    absorbing goal state; the episode clock is not part of the state.
    Returns (mdp, state descriptors, goal state index). Intended for maps
    with few grass cells; the state count grows with 2^grass.
    """
    cells, start = _turf.parse_turf_map(map_text)
    h, w = cells.shape
    grass_cells = [(r, c) for r in range(h) for c in range(w) if cells[r, c] == _turf.GRASS]
    grass_index = {cell: i for i, cell in enumerate(grass_cells)}

    def successor(pos, spoiled, action):
        dr, dc = _turf.MOVES[action]
        r = min(max(pos[0] + dr, 0), h - 1)
        c = min(max(pos[1] + dc, 0), w - 1)
        if cells[r, c] == _turf.GOAL:
            return "goal"
        new_spoiled = spoiled
        if cells[r, c] == _turf.GRASS and not (spoiled >> grass_index[(r, c)]) & 1:
            new_spoiled = spoiled | (1 << grass_index[(r, c)])
        return ((r, c), new_spoiled)

    init = (start, 0)
    index = {init: 0}
    states = [init]
    frontier = [init]
    while frontier:
        pos, spoiled = frontier.pop()
        for a in range(4):
            nxt = successor(pos, spoiled, a)
            if nxt == "goal" or nxt in index:
                continue
            index[nxt] = len(states)
            states.append(nxt)
            frontier.append(nxt)

    goal = len(states)
    n = goal + 1
    P = np.zeros((n, 4, n))
    for s, (pos, spoiled) in enumerate(states):
        for a in range(4):
            nxt = successor(pos, spoiled, a)
            P[s, a, goal if nxt == "goal" else index[nxt]] = 1.0
    P[goal, :, goal] = 1.0
    mu0 = np.zeros(n)
    mu0[0] = 1.0
    return TabularMDP(P=P, mu0=mu0), states, goal
