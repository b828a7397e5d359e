"""Windy cliff walk on a 6x8 grid.

The bottom row is the cliff; after each move the wind pushes the agent one
row toward it with a fixed probability. Staying alive earns +1 per step,
entering the cliff ends the episode, and 250 surviving steps is a perfect
run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RngState

CLIFF_ROWS = 6
CLIFF_COLS = 8
CLIFF_ROW = CLIFF_ROWS - 1  # row index of the cliff edge
CLIFF_MAX_STEPS = 250
START = (0, 0)

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


@dataclass
class CliffState:
    pos: tuple[int, int]
    t: int = 0
    alive: bool = True


def cliff_reset() -> CliffState:
    return CliffState(pos=START, t=0, alive=True)


def cliff_step(
    state: CliffState, action: int, p_wind: float, rng: RngState
) -> tuple[CliffState, float, bool]:
    """Apply the move with boundary clamp, then the wind. +1 while alive."""
    if not state.alive:
        raise ValueError("stepping a dead state")
    if state.t >= CLIFF_MAX_STEPS:
        raise ValueError("stepping past the episode step cap")
    dr, dc = MOVES[action]
    r = min(max(state.pos[0] + dr, 0), CLIFF_ROWS - 1)
    c = min(max(state.pos[1] + dc, 0), CLIFF_COLS - 1)
    if r < CLIFF_ROW and p_wind > 0.0 and rng.gen.random() < p_wind:
        r += 1
    t = state.t + 1
    if r == CLIFF_ROW:
        return CliffState(pos=(r, c), t=t, alive=False), 0.0, True
    done = t >= CLIFF_MAX_STEPS
    return CliffState(pos=(r, c), t=t, alive=True), 1.0, done


def cliff_obs(state: CliffState) -> np.ndarray:
    """One-hot cell indicator over the full grid, cliff row included."""
    obs = np.zeros(CLIFF_ROWS * CLIFF_COLS, dtype=np.float64)
    obs[state.pos[0] * CLIFF_COLS + state.pos[1]] = 1.0
    return obs


class CliffEnv:
    n_actions = 4
    obs_dim = CLIFF_ROWS * CLIFF_COLS

    def __init__(self, p_wind: float = 0.0):
        self.p_wind = p_wind
        self.state: CliffState | None = None

    def reset(self, rng: RngState | None = None) -> np.ndarray:
        self.state = cliff_reset()
        return cliff_obs(self.state)

    def step(self, action: int, rng: RngState) -> tuple[np.ndarray, float, bool, dict]:
        self.state, reward, done = cliff_step(self.state, action, self.p_wind, rng)
        info = {"irreversible": not self.state.alive}
        return cliff_obs(self.state), reward, done, info
