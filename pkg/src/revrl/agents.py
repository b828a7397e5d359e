"""On-policy actor-critic (clipped-surrogate updates, entropy regularized),
a random policy, and episode execution with optional penalty shaping or
action rejection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .core import Observation, RngState, Step, Trajectory
from .reversibility import RACConfig, ReversibilityModel, phi_eval, rac_filter

NEG_INF = -1e30


@dataclass
class PPOConfig:
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.05
    value_coef: float = 0.5
    gamma: float = 0.99
    rollout_steps: int = 2048
    epochs: int = 10
    lr: float = 0.01
    normalize_advantages: bool = True

    def __post_init__(self):
        if self.clip_epsilon <= 0.0:
            raise ValueError("clip_epsilon must be positive")
        if self.entropy_coef < 0.0:
            raise ValueError("entropy_coef must be nonnegative")


class PolicyValueNet:
    """Shared trunk with separate linear policy and value heads."""

    def __init__(self, obs_dim: int, n_actions: int, rng: RngState, hidden: int = 64):
        self.trunk = nn.dense_net([obs_dim, hidden, hidden], ["relu", "relu"], rng.fork("trunk"))
        self.policy_head = nn.dense_net([hidden, n_actions], ["identity"], rng.fork("policy"))
        self.value_head = nn.dense_net([hidden, 1], ["identity"], rng.fork("value"))
        self.n_actions = n_actions
        self.obs_dim = obs_dim

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + self.policy_head.params() + self.value_head.params()

    def forward(self, X: np.ndarray):
        """Returns (logits, values, caches) for a batch of observations."""
        h, ct = nn.forward(self.trunk, X)
        h2 = np.atleast_2d(h)
        logits, cp = nn.forward(self.policy_head, h2)
        values, cv = nn.forward(self.value_head, h2)
        return np.atleast_2d(logits), np.atleast_2d(values)[:, 0], (ct, cp, cv)


def masked_log_softmax(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Log-probabilities of the softmax restricted to allowed actions."""
    z = np.where(masks, logits, NEG_INF)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    return z - logsum


@dataclass
class RACController:
    """Bundles the rejection threshold with the scores that drive it."""

    cfg: RACConfig
    model: ReversibilityModel

    def scores(self, obs: Observation) -> np.ndarray:
        return phi_eval(self.model, obs)

    def filter(self, probs: np.ndarray, obs: Observation) -> tuple[np.ndarray, np.ndarray]:
        phi = self.scores(obs)
        filtered = rac_filter(probs, phi, self.cfg)
        return filtered, phi


def action_mask(phi: np.ndarray, probs: np.ndarray, beta: float) -> np.ndarray:
    """Allowed-action mask equivalent to the rejection filter on `probs`."""
    keep = phi >= beta
    if probs[keep].sum() <= 0.0:
        keep = np.zeros_like(keep)
        keep[int(np.argmax(phi))] = True
    return keep


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def policy_sample(net: PolicyValueNet, obs: Observation, rng: RngState,
                  rac: RACController | None = None) -> tuple[int, np.ndarray]:
    """Draw an action; returns it with the distribution actually sampled from."""
    logits, _, _ = net.forward(obs[None, :])
    probs = softmax(logits[0])
    if rac is not None:
        probs, _ = rac.filter(probs, obs)
    action = int(rng.gen.choice(net.n_actions, p=probs))
    return action, probs


class RandomPolicy:
    """Uniform over actions; stands in for a PolicyValueNet during collection."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def sample(self, obs: Observation, rng: RngState,
               rac: RACController | None = None) -> tuple[int, np.ndarray]:
        probs = np.full(self.n_actions, 1.0 / self.n_actions)
        if rac is not None:
            probs, _ = rac.filter(probs, obs)
        return int(rng.gen.choice(self.n_actions, p=probs)), probs


# ---------------------------------------------------------------------------
# Rollouts and episodes
# ---------------------------------------------------------------------------

@dataclass
class Rollout:
    obs: np.ndarray        # (N, D)
    actions: np.ndarray    # (N,)
    rewards: np.ndarray    # (N,) shaped rewards the agent optimizes
    dones: np.ndarray      # (N,) bool
    masks: np.ndarray      # (N, A) allowed actions at sampling time
    logp_old: np.ndarray   # (N,) log prob of the taken action under the acting dist
    values_old: np.ndarray # (N,)
    bootstrap: float       # value of the state following the last step (0 if done)


@dataclass
class EpisodeMetrics:
    length: int
    extrinsic_return: float
    intrinsic_return: float
    irreversible_events: int
    success: bool = False


def run_episode(env, policy, rng: RngState, rac: RACController | None = None,
                max_steps: int | None = None, seed: int = 0,
                episode_index: int = 0) -> tuple[Trajectory, EpisodeMetrics]:
    """Execute one full episode and collect safety metrics.

    `policy` is a PolicyValueNet or RandomPolicy; penalty shaping is applied
    by wrapping the environment beforehand. Irreversible events are counted
    from the environment's step info.
    """
    obs = env.reset(rng)
    steps: list[Step] = []
    extrinsic = intrinsic = 0.0
    events = 0
    success = False
    done = False
    while not done:
        if isinstance(policy, RandomPolicy):
            action, _ = policy.sample(obs, rng, rac=rac)
        else:
            action, _ = policy_sample(policy, obs, rng, rac=rac)
        new_obs, reward, done, info = env.step(action, rng)
        extrinsic += info.get("extrinsic", reward)
        intrinsic += info.get("intrinsic", 0.0)
        events += int(bool(info.get("irreversible", False)))
        success = success or bool(info.get("success", False))
        steps.append(Step(obs=obs, action=action, reward=reward, done=done))
        obs = new_obs
        if max_steps is not None and len(steps) >= max_steps and not done:
            steps[-1].done = True
            done = True
    traj = Trajectory(steps=steps, seed=seed, episode_index=episode_index, final_obs=obs)
    metrics = EpisodeMetrics(length=len(steps), extrinsic_return=extrinsic,
                             intrinsic_return=intrinsic, irreversible_events=events,
                             success=success)
    return traj, metrics


class RolloutCollector:
    """Collects fixed-size on-policy rollouts, carrying episodes across calls.

    Works with a raw environment or a penalty wrapper (the step info's
    extrinsic/intrinsic split is used for metrics when present). With a
    rejection controller the allowed-action mask is recorded per step so the
    update optimizes the distribution that actually acted.
    """

    def __init__(self, env, net: PolicyValueNet, rng: RngState,
                 rac: RACController | None = None, seed: int = 0):
        self.env = env
        self.net = net
        self.rng = rng
        self.rac = rac
        self.seed = seed
        self.episode_index = 0
        self.total_steps = 0
        self._obs: Observation | None = None
        self._steps: list[Step] = []
        self._ep_extrinsic = 0.0
        self._ep_intrinsic = 0.0
        self._ep_events = 0
        self._ep_success = False

    def collect(self, n_steps: int) -> tuple[Rollout, list[EpisodeMetrics], list[Trajectory]]:
        n_actions = self.net.n_actions
        obs_buf = np.empty((n_steps, self.net.obs_dim))
        act_buf = np.empty(n_steps, dtype=np.int64)
        rew_buf = np.empty(n_steps)
        done_buf = np.zeros(n_steps, dtype=bool)
        mask_buf = np.ones((n_steps, n_actions), dtype=bool)
        logp_buf = np.empty(n_steps)
        val_buf = np.empty(n_steps)
        metrics: list[EpisodeMetrics] = []
        trajs: list[Trajectory] = []

        if self._obs is None:
            self._obs = self.env.reset(self.rng)
        for i in range(n_steps):
            obs = self._obs
            logits, values, _ = self.net.forward(obs[None, :])
            probs = softmax(logits[0])
            if self.rac is not None:
                mask = action_mask(self.rac.scores(obs), probs, self.rac.cfg.beta)
                masked = np.where(mask, probs, 0.0)
                masked /= masked.sum()
            else:
                mask = np.ones(n_actions, dtype=bool)
                masked = probs
            action = int(self.rng.gen.choice(n_actions, p=masked))
            new_obs, reward, done, info = self.env.step(action, self.rng)
            obs_buf[i] = obs
            act_buf[i] = action
            rew_buf[i] = reward
            done_buf[i] = done
            mask_buf[i] = mask
            logp_buf[i] = np.log(masked[action])
            val_buf[i] = values[0]
            self._steps.append(Step(obs=obs, action=action, reward=reward, done=done))
            self._ep_extrinsic += info.get("extrinsic", reward)
            self._ep_intrinsic += info.get("intrinsic", 0.0)
            self._ep_events += int(bool(info.get("irreversible", False)))
            self._ep_success = self._ep_success or bool(info.get("success", False))
            self.total_steps += 1
            if done:
                trajs.append(Trajectory(steps=self._steps, seed=self.seed,
                                        episode_index=self.episode_index,
                                        final_obs=new_obs))
                metrics.append(EpisodeMetrics(
                    length=len(self._steps), extrinsic_return=self._ep_extrinsic,
                    intrinsic_return=self._ep_intrinsic,
                    irreversible_events=self._ep_events, success=self._ep_success))
                self.episode_index += 1
                self._steps = []
                self._ep_extrinsic = self._ep_intrinsic = 0.0
                self._ep_events = 0
                self._ep_success = False
                self._obs = self.env.reset(self.rng)
            else:
                self._obs = new_obs

        if done_buf[-1]:
            bootstrap = 0.0
        else:
            _, tail_value, _ = self.net.forward(self._obs[None, :])
            bootstrap = float(tail_value[0])
        rollout = Rollout(obs=obs_buf, actions=act_buf, rewards=rew_buf, dones=done_buf,
                          masks=mask_buf, logp_old=logp_buf, values_old=val_buf,
                          bootstrap=bootstrap)
        return rollout, metrics, trajs


# ---------------------------------------------------------------------------
# PPO update
# ---------------------------------------------------------------------------

def discounted_returns(rewards: np.ndarray, dones: np.ndarray, gamma: float,
                       bootstrap: float) -> np.ndarray:
    """Per-step discounted return, resetting at episode ends; the tail of a
    truncated episode is bootstrapped with the supplied value."""
    n = len(rewards)
    out = np.empty(n)
    future = bootstrap
    for t in range(n - 1, -1, -1):
        if dones[t]:
            future = 0.0
        future = rewards[t] + gamma * future
        out[t] = future
    return out


def ppo_update(net: PolicyValueNet, rollout: Rollout, cfg: PPOConfig,
               optimizer: nn.AdamState) -> dict:
    """Clipped-surrogate policy update with value regression and an entropy
    bonus; runs cfg.epochs full-batch passes. Returns diagnostics."""
    n = rollout.obs.shape[0]
    returns = discounted_returns(rollout.rewards, rollout.dones, cfg.gamma,
                                 rollout.bootstrap)
    adv = returns - rollout.values_old
    if cfg.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    rows = np.arange(n)
    diag: dict = {}
    for _ in range(cfg.epochs):
        logits, values, (ct, cp, cv) = net.forward(rollout.obs)
        logp_all = masked_log_softmax(logits, rollout.masks)
        probs = np.exp(logp_all)
        logp = logp_all[rows, rollout.actions]
        ratio = np.exp(logp - rollout.logp_old)
        clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon)
        surrogate = np.minimum(ratio * adv, clipped * adv)
        active = ratio * adv <= clipped * adv  # gradient flows only here
        with np.errstate(invalid="ignore"):
            plogp = np.where(probs > 0.0, probs * logp_all, 0.0)
        entropy = -plogp.sum(axis=1)
        value_err = values - returns
        policy_loss = -float(surrogate.mean())
        value_loss = float((value_err ** 2).mean())
        total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * float(entropy.mean())
        if not np.isfinite(total):
            raise FloatingPointError("non-finite loss in policy update")

        # d loss / d logits: surrogate term plus entropy term
        coef = np.where(active, -adv * ratio, 0.0) / n
        glogits = coef[:, None] * (np.eye(net.n_actions)[rollout.actions] - probs)
        gent = -probs * (logp_all + entropy[:, None])   # d entropy / d logits
        glogits -= cfg.entropy_coef * gent / n          # loss carries -coef * mean(entropy)
        glogits = np.where(rollout.masks, glogits, 0.0)
        gvalues = cfg.value_coef * 2.0 * value_err[:, None] / n

        gp, gh_p = nn.backward(net.policy_head, cp, glogits)
        gv, gh_v = nn.backward(net.value_head, cv, gvalues)
        gt, _ = nn.backward(net.trunk, ct, gh_p + gh_v)
        nn.adam_step(optimizer, net.params(), gt + gp + gv)
        diag = {"policy_loss": policy_loss, "value_loss": value_loss,
                "entropy": float(entropy.mean()), "total_loss": total,
                "mean_return": float(returns.mean())}
    return diag
