"""Action-conditioned reversibility estimation and its two uses.

The estimator regresses, for each transition (x, a, x'), onto the
precedence network's probability of seeing x again after x' — the chance
the step can be undone. Low scores mark actions that are hard to take
back. Two consumers: an auxiliary-reward wrapper that penalizes
hard-to-reverse transitions above a threshold, and a rejection-sampling
filter that zeroes out the probability of actions below a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .core import Observation, ReplayBuffer, RngState
from .precedence import PrecedenceModel, psi_eval, psi_eval_batch


@dataclass
class RAEConfig:
    """Penalty wrapper settings: threshold in (0,1), penalty weight >= 0."""

    beta: float = 0.7
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.lam < 0.0:
            raise ValueError("penalty weight must be nonnegative")


@dataclass
class RACConfig:
    """Rejection settings: actions scoring below beta get probability zero."""

    beta: float = 0.2
    fallback: str = "argmax-phi"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.fallback != "argmax-phi":
            raise ValueError("only the argmax-phi fallback is supported")


@dataclass
class ReversibilityModel:
    net: nn.DenseNet  # obs -> one logit per action; sigmoid at evaluation

    def params(self) -> list[np.ndarray]:
        return self.net.params()

    def copy(self) -> "ReversibilityModel":
        return ReversibilityModel(self.net.copy())

    @property
    def n_actions(self) -> int:
        return self.net.out_dim


def reversibility_model(obs_dim: int, n_actions: int, rng: RngState,
                        hidden: int = 64) -> ReversibilityModel:
    net = nn.dense_net([obs_dim, hidden, n_actions], ["relu", "identity"], rng.fork("rev"))
    return ReversibilityModel(net=net)


def phi_eval(model: ReversibilityModel, x: Observation) -> np.ndarray:
    """Per-action reversibility scores in (0, 1)."""
    z, _ = nn.forward(model.net, x)
    return nn.sigmoid(np.atleast_1d(z))


def phi_eval_batch(model: ReversibilityModel, X: np.ndarray) -> np.ndarray:
    z, _ = nn.forward(model.net, X)
    return nn.sigmoid(np.atleast_2d(z))


def rae_reward(psi_value: float, cfg: RAEConfig) -> float:
    """Auxiliary reward: -lam * psi when psi exceeds the threshold, else 0."""
    if not 0.0 <= psi_value <= 1.0:
        raise ValueError("psi_value must lie in [0, 1]")
    if psi_value > cfg.beta:
        return -cfg.lam * psi_value
    return 0.0


def rac_filter(policy_probs: np.ndarray, phi_scores: np.ndarray, cfg: RACConfig) -> np.ndarray:
    """Zero out actions scoring below beta and renormalize the rest.

    If every action is rejected the filter falls back to putting all mass
    on the highest-scoring action, so sampling always terminates.
    """
    policy_probs = np.asarray(policy_probs, dtype=np.float64)
    if abs(policy_probs.sum() - 1.0) > 1e-9:
        raise ValueError("policy probabilities must sum to 1")
    keep = np.asarray(phi_scores) >= cfg.beta
    z = float(policy_probs[keep].sum())
    out = np.zeros_like(policy_probs)
    if z <= 0.0:
        out[int(np.argmax(phi_scores))] = 1.0
        return out
    out[keep] = policy_probs[keep] / z
    return out


# ---------------------------------------------------------------------------
# Training: regression against the precedence network
# ---------------------------------------------------------------------------

class TransitionSampler:
    """Prepared uniform sampler of (x, a, x') triples across stored steps."""

    def __init__(self, trajs, include_final: bool = False):
        self.trajs = trajs
        self.stacks = [t.observations(include_final=include_final) for t in trajs]
        self.acts = [t.actions() for t in trajs]
        counts = np.array([max(s.shape[0] - 1, 0) for s in self.stacks], dtype=np.int64)
        if counts.sum() == 0:
            raise ValueError("no transitions available to sample")
        self.cum = np.cumsum(counts)
        self.dim = self.stacks[0].shape[1]

    def sample(self, batch_size: int, rng: RngState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ks = rng.gen.integers(0, self.cum[-1], size=batch_size)
        idx = np.searchsorted(self.cum, ks, side="right")
        offsets = ks - np.concatenate([[0], self.cum[:-1]])[idx]
        X = np.empty((batch_size, self.dim))
        X2 = np.empty((batch_size, self.dim))
        A = np.empty(batch_size, dtype=np.int64)
        for i, (ti, t) in enumerate(zip(idx, offsets)):
            X[i] = self.stacks[ti][t]
            X2[i] = self.stacks[ti][t + 1]
            A[i] = self.acts[ti][t]
        return X, A, X2


def sample_transitions(trajs, batch_size: int, rng: RngState,
                       include_final: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-shot triple sampling; prefer TransitionSampler for repeated draws."""
    return TransitionSampler(trajs, include_final=include_final).sample(batch_size, rng)


def reversibility_update(model: ReversibilityModel, psi: PrecedenceModel,
                         X: np.ndarray, A: np.ndarray, X2: np.ndarray,
                         optimizer: nn.AdamState) -> float:
    """One squared-error step toward the undo-direction precedence targets."""
    targets = psi_eval_batch(psi, X2, X)  # probability of seeing x again after x'
    z, cache = nn.forward(model.net, X)
    z = np.atleast_2d(z)
    p = nn.sigmoid(z)
    b = X.shape[0]
    rows = np.arange(b)
    err = p[rows, A] - targets
    loss = 0.5 * float(np.mean(err ** 2))
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite reversibility loss")
    gz = np.zeros_like(z)
    gz[rows, A] = err * p[rows, A] * (1.0 - p[rows, A]) / b
    grads, _ = nn.backward(model.net, cache, gz)
    nn.adam_step(optimizer, model.params(), grads)
    return loss


def train_reversibility(model: ReversibilityModel, buffer: ReplayBuffer,
                        psi: PrecedenceModel, batch_size: int, steps: int,
                        optimizer: nn.AdamState, rng: RngState,
                        include_final: bool = False) -> ReversibilityModel:
    """Fit per-action reversibility by regression on sampled transitions."""
    if steps <= 0:
        return model
    trajs = [t for t in buffer.trajectories
             if t.observations(include_final=include_final).shape[0] >= 2]
    if not trajs:
        raise ValueError("buffer holds no transitions")
    sampler = TransitionSampler(trajs, include_final=include_final)
    for _ in range(steps):
        X, A, X2 = sampler.sample(batch_size, rng)
        reversibility_update(model, psi, X, A, X2, optimizer)
    return model


# ---------------------------------------------------------------------------
# Environment wrapper for penalty shaping
# ---------------------------------------------------------------------------

class RAEWrapper:
    """Adds the irreversibility penalty to every step reward.

    The penalty for a transition is based on the precedence estimate
    between the two consecutive observations; the unshaped reward and the
    penalty are reported separately in the step info.
    """

    def __init__(self, env, psi: PrecedenceModel, cfg: RAEConfig):
        self.env = env
        self.psi = psi
        self.cfg = cfg
        self._last_obs: Observation | None = None

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    @property
    def obs_dim(self) -> int:
        return self.env.obs_dim

    def reset(self, rng: RngState | None = None):
        obs = self.env.reset(rng)
        self._last_obs = obs
        return obs

    def step(self, action: int, rng: RngState | None = None):
        obs, reward, done, info = self.env.step(action, rng)
        value = psi_eval(self.psi, self._last_obs, obs)
        intrinsic = rae_reward(value, self.cfg)
        self._last_obs = obs
        info = dict(info)
        info["extrinsic"] = reward
        info["intrinsic"] = intrinsic
        return obs, reward + intrinsic, done, info


def wrap_env_rae(env, psi: PrecedenceModel, cfg: RAEConfig) -> RAEWrapper:
    return RAEWrapper(env, psi, cfg)
