"""Cartpole with the canonical published constants and explicit Euler stepping.

The long-horizon variant ("plus") is the same system with the step cap
raised from 200 to 50,000. A reward-free mode zeroes the per-step reward
so intrinsic signals can be studied in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RngState

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
POLE_HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * POLE_HALF_LENGTH
FORCE_MAG = 10.0
DT = 0.02
THETA_LIMIT = 0.209  # ~12 degrees
X_LIMIT = 2.4

MAX_STEPS_STANDARD = 200
MAX_STEPS_PLUS = 50_000


@dataclass
class CartpoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    t: int = 0

    def vector(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot], dtype=np.float64)

    def out_of_bounds(self) -> bool:
        return abs(self.theta) > THETA_LIMIT or abs(self.x) > X_LIMIT


def cartpole_reset(rng: RngState) -> CartpoleState:
    x, x_dot, theta, theta_dot = rng.gen.uniform(-0.05, 0.05, size=4)
    return CartpoleState(x, x_dot, theta, theta_dot, t=0)


def cartpole_step(
    state: CartpoleState,
    action: int,
    max_steps: int = MAX_STEPS_STANDARD,
    reward_free: bool = False,
) -> tuple[CartpoleState, float, bool]:
    """Advance one Euler step; action 0 pushes left, 1 pushes right."""
    if state.out_of_bounds():
        raise ValueError("stepping a terminated cartpole state")
    if state.t >= max_steps:
        raise ValueError("stepping past the episode step cap")
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_t = np.cos(state.theta)
    sin_t = np.sin(state.theta)
    temp = (force + POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t ** 2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    new = CartpoleState(
        x=state.x + DT * state.x_dot,
        x_dot=state.x_dot + DT * x_acc,
        theta=state.theta + DT * state.theta_dot,
        theta_dot=state.theta_dot + DT * theta_acc,
        t=state.t + 1,
    )
    done = new.out_of_bounds() or new.t >= max_steps
    reward = 0.0 if reward_free else 1.0
    return new, reward, done


class CartpoleEnv:
    """Stateful wrapper around the pure step function."""

    n_actions = 2
    obs_dim = 4

    def __init__(self, max_steps: int = MAX_STEPS_STANDARD, reward_free: bool = False):
        self.max_steps = max_steps
        self.reward_free = reward_free
        self.state: CartpoleState | None = None

    def reset(self, rng: RngState) -> np.ndarray:
        self.state = cartpole_reset(rng)
        return self.state.vector()

    def step(self, action: int, rng: RngState | None = None) -> tuple[np.ndarray, float, bool, dict]:
        self.state, reward, done = cartpole_step(
            self.state, action, max_steps=self.max_steps, reward_free=self.reward_free
        )
        return self.state.vector(), reward, done, {"irreversible": False}


# ---------------------------------------------------------------------------
# Batched stepping for cheap random-policy collection and filtered evaluation.
# ---------------------------------------------------------------------------

def cartpole_batch_reset(n: int, rng: RngState) -> np.ndarray:
    """(n, 4) array of fresh start states."""
    return rng.gen.uniform(-0.05, 0.05, size=(n, 4))


def cartpole_batch_step(states: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Euler step. Returns (new_states, out_of_bounds_mask)."""
    x, x_dot, theta, theta_dot = states.T
    force = np.where(actions == 1, FORCE_MAG, -FORCE_MAG)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    temp = (force + POLE_MASS_LENGTH * theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t ** 2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    new = np.empty_like(states)
    new[:, 0] = x + DT * x_dot
    new[:, 1] = x_dot + DT * x_acc
    new[:, 2] = theta + DT * theta_dot
    new[:, 3] = theta_dot + DT * theta_acc
    dead = (np.abs(new[:, 2]) > THETA_LIMIT) | (np.abs(new[:, 0]) > X_LIMIT)
    return new, dead
