"""Run orchestration: builds environments, trains estimators and agents per
the experiment config, and writes self-describing result directories."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..agents import (
    EpisodeMetrics,
    PolicyValueNet,
    PPOConfig,
    RACController,
    RandomPolicy,
    RolloutCollector,
    ppo_update,
    run_episode,
)
from ..core import ReplayBuffer, RngState, Step, Trajectory
from ..envs import (
    CartpoleEnv,
    CliffEnv,
    TurfEnv,
    cartpole_batch_reset,
    cartpole_batch_step,
)
from ..envs.cartpole import MAX_STEPS_PLUS, MAX_STEPS_STANDARD
from ..precedence import PrecedenceModel, precedence_model, train_precedence
from ..reversibility import (
    RACConfig,
    RAEConfig,
    ReversibilityModel,
    reversibility_model,
    train_reversibility,
    wrap_env_rae,
)
from .config import ExperimentConfig


def make_env(cfg: ExperimentConfig):
    params = cfg.env_params or {}
    if cfg.env == "cartpole":
        return CartpoleEnv(max_steps=MAX_STEPS_STANDARD,
                           reward_free=bool(params.get("reward_free", False)))
    if cfg.env == "cartpole_plus":
        return CartpoleEnv(max_steps=MAX_STEPS_PLUS,
                           reward_free=bool(params.get("reward_free", False)))
    if cfg.env == "turf":
        return TurfEnv()
    if cfg.env == "cliff":
        return CliffEnv(p_wind=float(params.get("p_wind", 0.0)))
    raise ValueError(f"unknown environment {cfg.env!r}")


def ppo_config(cfg: ExperimentConfig) -> PPOConfig:
    return PPOConfig(clip_epsilon=cfg.clip_epsilon, entropy_coef=cfg.entropy_coef,
                     value_coef=cfg.value_coef, gamma=cfg.gamma,
                     rollout_steps=cfg.rollout_steps, epochs=cfg.epochs, lr=cfg.lr)


# ---------------------------------------------------------------------------
# Offline data collection and estimator training
# ---------------------------------------------------------------------------

def collect_random_trajectories(cfg: ExperimentConfig, n_trajectories: int,
                                rng: RngState) -> tuple[ReplayBuffer, float]:
    """Random-policy experience for offline estimator training.

    Returns the filled buffer and the mean episode length. Cartpole variants
    use the batched stepper; episodes there are capped at the standard 200.
    """
    if cfg.env in ("cartpole", "cartpole_plus"):
        trajs = _collect_cartpole_batch(n_trajectories, rng)
    else:
        env = make_env(cfg)
        policy = RandomPolicy(env.n_actions)
        trajs = []
        for ep in range(n_trajectories):
            traj, _ = run_episode(env, policy, rng, episode_index=ep)
            trajs.append(traj)
    total = sum(len(t) for t in trajs)
    buf = ReplayBuffer(capacity=max(total, cfg.buffer_capacity))
    for t in trajs:
        buf.push(t)
    return buf, total / max(len(trajs), 1)


def _collect_cartpole_batch(n_trajectories: int, rng: RngState,
                            batch: int = 1024) -> list[Trajectory]:
    trajs: list[Trajectory] = []
    states = cartpole_batch_reset(batch, rng)
    hists: list[list[np.ndarray]] = [[states[i].copy()] for i in range(batch)]
    acts: list[list[int]] = [[] for _ in range(batch)]
    while len(trajs) < n_trajectories:
        actions = rng.gen.integers(0, 2, size=batch)
        new_states, dead = cartpole_batch_step(states, actions)
        for i in range(batch):
            acts[i].append(int(actions[i]))
            hists[i].append(new_states[i].copy())
            if dead[i] or len(acts[i]) >= MAX_STEPS_STANDARD:
                obs_stack = np.array(hists[i])
                steps = [Step(obs=obs_stack[t], action=acts[i][t], reward=1.0,
                              done=t == len(acts[i]) - 1)
                         for t in range(len(acts[i]))]
                trajs.append(Trajectory(steps=steps, episode_index=len(trajs),
                                        final_obs=obs_stack[-1]))
                fresh = cartpole_batch_reset(1, rng)[0]
                hists[i] = [fresh]
                acts[i] = []
                new_states[i] = fresh
        states = new_states
    return trajs[:n_trajectories]


@dataclass
class OfflineEstimators:
    psi: PrecedenceModel
    rev: ReversibilityModel
    mean_traj_length: float
    psi_trace_tail: float


def train_offline_estimators(cfg: ExperimentConfig, rng: RngState,
                             n_actions: int, obs_dim: int) -> OfflineEstimators:
    """Collect random experience, then fit the order and undo estimators."""
    buf, mean_len = collect_random_trajectories(cfg, cfg.offline_trajectories,
                                                rng.fork("collect"))
    psi = precedence_model(obs_dim, rng.fork("psi"), hidden=cfg.hidden)
    for p in psi.head.params():
        p[:] = 0.0
    psi_opt = nn.AdamState(psi.params(), lr=cfg.estimator_lr,
                           weight_decay=cfg.estimator_weight_decay)
    psi_rng = rng.fork("psi-train")
    psi, trace = train_precedence(psi, buf, w=cfg.window, batch_size=cfg.batch_size,
                                  steps=cfg.offline_psi_steps, optimizer=psi_opt,
                                  rng=psi_rng, include_final=cfg.include_final_obs)
    # a low-rate tail settles the adaptive-step wobble so thresholded
    # consumers see stable scores
    psi_opt.lr = cfg.estimator_lr / 10.0
    psi, trace = train_precedence(psi, buf, w=cfg.window, batch_size=cfg.batch_size,
                                  steps=cfg.offline_psi_steps // 4, optimizer=psi_opt,
                                  rng=psi_rng, include_final=cfg.include_final_obs,
                                  trace=trace)
    rev = reversibility_model(obs_dim, n_actions, rng.fork("rev"), hidden=cfg.hidden)
    # decay keeps scores for patterns absent from the data near 1/2 instead
    # of letting initialization decide them
    rev_opt = nn.AdamState(rev.params(), lr=cfg.estimator_lr,
                           weight_decay=cfg.estimator_weight_decay)
    rev_rng = rng.fork("rev-train")
    rev = train_reversibility(rev, buf, psi, batch_size=cfg.batch_size,
                              steps=cfg.offline_phi_steps, optimizer=rev_opt,
                              rng=rev_rng, include_final=cfg.include_final_obs)
    rev_opt.lr = cfg.estimator_lr / 10.0
    rev = train_reversibility(rev, buf, psi, batch_size=cfg.batch_size,
                              steps=cfg.offline_phi_steps // 4, optimizer=rev_opt,
                              rng=rev_rng, include_final=cfg.include_final_obs)
    tail = float(np.mean([r[1] for r in trace.records[-200:]])) if trace.records else float("nan")
    return OfflineEstimators(psi=psi, rev=rev, mean_traj_length=mean_len,
                             psi_trace_tail=tail)


# ---------------------------------------------------------------------------
# Per-seed training
# ---------------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    length: int
    extrinsic_return: float
    intrinsic_return: float
    irreversible_events: int
    wall_steps: int
    success: bool = False


@dataclass
class SeedResult:
    seed: int
    episodes: list[EpisodeRecord]
    solved_at: int | None
    total_steps: int
    net: PolicyValueNet | None = None
    psi: PrecedenceModel | None = None
    rev: ReversibilityModel | None = None

    def tail_mean(self, key: str, n: int = 100) -> float:
        vals = [getattr(e, key) for e in self.episodes[-n:]]
        return float(np.mean(vals)) if vals else float("nan")


def _solved(cfg: ExperimentConfig, episodes: list[EpisodeRecord]) -> bool:
    if not cfg.stop_on_solve or len(episodes) < cfg.solve_window:
        return False
    window = episodes[-cfg.solve_window:]
    if cfg.solve_requires_zero_events and any(e.irreversible_events for e in window):
        return False
    if cfg.env in ("cartpole", "cartpole_plus"):
        return float(np.mean([e.length for e in window])) >= cfg.solve_threshold
    return float(np.mean([float(e.success) for e in window])) >= cfg.solve_threshold


def train_ppo_seed(cfg: ExperimentConfig, seed: int,
                   estimators: OfflineEstimators | None = None) -> SeedResult:
    """One full training run: PPO with the configured wrapper.

    In offline estimator mode the estimators are trained here from this
    seed's stream when the caller has not already supplied them.
    """
    rng = RngState(seed)
    env = make_env(cfg)
    if (estimators is None and cfg.estimator_mode == "offline"
            and cfg.wrapper in ("rae", "rac")):
        estimators = train_offline_estimators(cfg, rng.fork("offline"),
                                              env.n_actions, env.obs_dim)
    pcfg = ppo_config(cfg)
    net = PolicyValueNet(env.obs_dim, env.n_actions, rng.fork("net"), hidden=cfg.hidden)
    opt = nn.AdamState(net.params(), lr=pcfg.lr)

    psi = estimators.psi if estimators else None
    rac = None
    rae_cfg = None
    wrapped = env
    psi_opt = None
    online_psi = cfg.wrapper == "rae" and cfg.estimator_mode == "online"
    if cfg.wrapper == "rae":
        if psi is None:
            psi = precedence_model(env.obs_dim, rng.fork("psi"), hidden=cfg.hidden)
            for p in psi.head.params():
                p[:] = 0.0
            psi_opt = nn.AdamState(psi.params(), lr=cfg.estimator_lr,
                                   weight_decay=cfg.estimator_weight_decay)
        rae_cfg = RAEConfig(beta=cfg.beta, lam=cfg.penalty_weight)
        warm_cfg = RAEConfig(beta=cfg.beta, lam=0.0)
        wrapped = wrap_env_rae(env, psi, warm_cfg if cfg.penalty_warmup_steps > 0 else rae_cfg)
    elif cfg.wrapper == "rac":
        if estimators is None:
            raise ValueError("rejection control needs trained estimators")
        rac = RACController(RACConfig(beta=cfg.beta), estimators.rev)

    collector = RolloutCollector(wrapped, net, rng.fork("rollouts"), rac=rac, seed=seed)
    buf = ReplayBuffer(capacity=cfg.buffer_capacity) if online_psi else None
    psi_rng = rng.fork("psi-train")
    psi_updates = 0
    episodes: list[EpisodeRecord] = []
    solved_at = None
    while collector.total_steps < cfg.step_budget:
        if (cfg.wrapper == "rae" and cfg.penalty_warmup_steps > 0
                and collector.total_steps >= cfg.penalty_warmup_steps):
            wrapped.cfg = rae_cfg
        rollout, metrics, trajs = collector.collect(pcfg.rollout_steps)
        if online_psi:
            for t in trajs:
                buf.push(t)
            due = collector.total_steps // cfg.psi_update_every
            pending = due - psi_updates
            if pending > 0 and buf.total_steps >= 2 * cfg.batch_size:
                train_precedence(psi, buf, w=cfg.window, batch_size=cfg.batch_size,
                                 steps=pending, optimizer=psi_opt, rng=psi_rng,
                                 include_final=cfg.include_final_obs)
                psi_updates = due
        for m in metrics:
            episodes.append(EpisodeRecord(
                seed=seed, episode=len(episodes), length=m.length,
                extrinsic_return=m.extrinsic_return,
                intrinsic_return=m.intrinsic_return,
                irreversible_events=m.irreversible_events,
                wall_steps=collector.total_steps, success=m.success))
        ppo_update(net, rollout, pcfg, opt)
        if _solved(cfg, episodes):
            solved_at = collector.total_steps
            break
    return SeedResult(seed=seed, episodes=episodes, solved_at=solved_at,
                      total_steps=collector.total_steps, net=net, psi=psi,
                      rev=estimators.rev if estimators else None)


def eval_policy(cfg: ExperimentConfig, net: PolicyValueNet, seed: int,
                episodes: int, rac: RACController | None = None):
    """Run the trained policy; for the grassland also tally cell visitation."""
    rng = RngState(seed).fork("eval")
    env = make_env(cfg)
    metrics: list[EpisodeMetrics] = []
    visitation = None
    if cfg.env == "turf":
        visitation = np.zeros((10, 10))
        for _ in range(episodes):
            obs = env.reset(rng)
            done = False
            while not done:
                from ..agents import policy_sample
                action, _ = policy_sample(net, obs, rng, rac=rac)
                obs, _, done, _ = env.step(action, rng)
                visitation[env.grid.agent_pos] += 1.0
        return metrics, visitation
    for i in range(episodes):
        _, m = run_episode(env, net, rng, rac=rac, episode_index=i)
        metrics.append(m)
    return metrics, visitation


# ---------------------------------------------------------------------------
# Result persistence
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    config: ExperimentConfig
    seed_results: list[SeedResult]
    summary: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def all_episodes(self) -> list[EpisodeRecord]:
        out = []
        for sr in self.seed_results:
            out.extend(sr.episodes)
        return out


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def episodes_csv(records: list[EpisodeRecord]) -> str:
    lines = ["run_seed,episode,length,extrinsic_return,intrinsic_return,"
             "irreversible_events,wall_steps"]
    for e in records:
        lines.append(f"{e.seed},{e.episode},{e.length},{e.extrinsic_return!r},"
                     f"{e.intrinsic_return!r},{e.irreversible_events},{e.wall_steps}")
    return "\n".join(lines) + "\n"


def mean_ci(values, z: float = 1.96) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(z * arr.std(ddof=1) / np.sqrt(arr.size))


def write_run_result(result: RunResult) -> str:
    """Persist config, metrics and summary; returns the run directory."""
    cfg = result.config
    run_dir = os.path.join(cfg.out_dir, cfg.name)
    atomic_write(os.path.join(run_dir, "config.cfg"), cfg.resolved_text())
    atomic_write(os.path.join(run_dir, "metrics.csv"), episodes_csv(result.all_episodes()))
    lines = [f"experiment: {cfg.name}"]
    for key, value in result.summary.items():
        lines.append(f"{key}: {value}")
    atomic_write(os.path.join(run_dir, "summary.txt"), "\n".join(lines) + "\n")
    for name, content in result.artifacts.items():
        atomic_write(os.path.join(run_dir, name), content)
    return run_dir


def run(config: ExperimentConfig) -> RunResult:
    """Execute the configured experiment across its seeds."""
    config.validate()
    estimators = None
    seed_results = []
    for seed in config.seeds:
        rng = RngState(seed)
        if config.estimator_mode == "offline" and config.wrapper in ("rae", "rac"):
            env = make_env(config)
            estimators = train_offline_estimators(config, rng.fork("offline"),
                                                  env.n_actions, env.obs_dim)
        if config.agent == "ppo":
            seed_results.append(train_ppo_seed(config, seed, estimators))
        else:
            seed_results.append(_run_random_seed(config, seed, estimators))
    result = RunResult(config=config, seed_results=seed_results)
    scores = [sr.tail_mean("extrinsic_return") for sr in seed_results]
    events = [sum(e.irreversible_events for e in sr.episodes) for sr in seed_results]
    m, ci = mean_ci(scores)
    result.summary = {
        "seeds": len(seed_results),
        "final_score_mean": m,
        "final_score_ci95": ci,
        "irreversible_events_total": int(np.sum(events)),
    }
    write_run_result(result)
    return result


def _run_random_seed(cfg: ExperimentConfig, seed: int,
                     estimators: OfflineEstimators | None) -> SeedResult:
    rng = RngState(seed)
    env = make_env(cfg)
    policy = RandomPolicy(env.n_actions)
    rac = None
    if cfg.wrapper == "rac":
        if estimators is None:
            raise ValueError("rejection control needs trained estimators")
        rac = RACController(RACConfig(beta=cfg.beta), estimators.rev)
    episodes: list[EpisodeRecord] = []
    steps = 0
    ep = 0
    while steps < cfg.step_budget and (cfg.eval_episodes <= 0 or ep < cfg.eval_episodes):
        _, m = run_episode(env, policy, rng.fork(f"ep{ep}"), rac=rac, episode_index=ep)
        steps += m.length
        episodes.append(EpisodeRecord(seed=seed, episode=ep, length=m.length,
                                      extrinsic_return=m.extrinsic_return,
                                      intrinsic_return=m.intrinsic_return,
                                      irreversible_events=m.irreversible_events,
                                      wall_steps=steps, success=m.success))
        ep += 1
    return SeedResult(seed=seed, episodes=episodes, solved_at=None, total_steps=steps,
                      psi=estimators.psi if estimators else None,
                      rev=estimators.rev if estimators else None)
