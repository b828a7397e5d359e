"""Shared domain types: trajectories, replay storage, deterministic randomness.

Observations are plain float64 numpy vectors; an environment fixes their
length. Everything downstream (pair sampling, estimator training, the
experiment runner) consumes the types defined here.
"""

from __future__ import annotations

import hashlib
import io
from collections import deque
from dataclasses import dataclass

import numpy as np

Observation = np.ndarray  # 1-D float64 vector, length fixed per environment


@dataclass
class Step:
    """One unit of interaction: the observation acted from, the action, its reward."""

    obs: Observation
    action: int
    reward: float
    done: bool


@dataclass
class Trajectory:
    """An ordered episode of steps plus the observation the episode ended in.

    `steps[i].obs` is the observation the agent acted from at time i;
    `final_obs` is the observation produced by the last action (terminal or
    truncation state). `done` is true only on the final step.
    """

    steps: list[Step]
    seed: int = 0
    episode_index: int = 0
    final_obs: Observation | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def observations(self, include_final: bool = False) -> np.ndarray:
        """Stack step observations into a (T, obs_dim) array.

        With include_final=True the terminal observation is appended as an
        extra row (T+1 rows); callers that feed learned estimators choose
        per environment whether terminal states are part of the data.
        Stacks are memoized; steps must not be mutated after first use.
        """
        key = "_obs_with_final" if include_final and self.final_obs is not None else "_obs_plain"
        cached = getattr(self, key, None)
        if cached is not None:
            return cached
        rows = [s.obs for s in self.steps]
        if include_final and self.final_obs is not None:
            rows = rows + [self.final_obs]
        stacked = np.stack(rows)
        setattr(self, key, stacked)
        return stacked

    def actions(self) -> np.ndarray:
        return np.array([s.action for s in self.steps], dtype=np.int64)

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=np.float64)

    def validate(self) -> None:
        if len(self.steps) < 1:
            raise ValueError("trajectory must contain at least one step")
        for i, s in enumerate(self.steps):
            if s.done != (i == len(self.steps) - 1):
                raise ValueError("done must be true exactly on the final step")


class ReplayBuffer:
    """FIFO store of whole trajectories, bounded by total step count.

    Eviction drops the oldest trajectory entirely so that pair sampling
    never sees a truncated episode.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._trajs: deque[Trajectory] = deque()
        self._steps = 0

    def __len__(self) -> int:
        return len(self._trajs)

    @property
    def total_steps(self) -> int:
        return self._steps

    @property
    def trajectories(self) -> tuple[Trajectory, ...]:
        return tuple(self._trajs)

    def push(self, traj: Trajectory) -> None:
        if len(traj) == 0:
            raise ValueError("cannot push an empty trajectory")
        if len(traj) > self.capacity:
            # trimming would truncate an episode, which pair sampling forbids
            raise ValueError(
                f"trajectory of {len(traj)} steps exceeds buffer capacity {self.capacity}"
            )
        self._trajs.append(traj)
        self._steps += len(traj)
        while self._steps > self.capacity:
            evicted = self._trajs.popleft()
            self._steps -= len(evicted)


def buffer_push(buffer: ReplayBuffer, traj: Trajectory) -> ReplayBuffer:
    """Append a trajectory, evicting oldest-first until the step bound holds."""
    buffer.push(traj)
    return buffer


class RngState:
    """Deterministic named-stream randomness.

    Wraps a counter-based generator (Philox) keyed by a stable digest of
    (seed, path of fork labels): the same seed and the same call sequence
    always reproduce the same draws, and sibling streams are independent.
    """

    def __init__(self, seed: int, _path: str = ""):
        self.seed = int(seed)
        self.path = _path
        key = hashlib.sha256(f"{self.seed}:{_path}".encode()).digest()
        self.gen = np.random.Generator(np.random.Philox(key=int.from_bytes(key[:16], "little")))

    def fork(self, label: str) -> "RngState":
        """Derive an independent child stream identified by `label`."""
        if not label:
            raise ValueError("fork label must be non-empty")
        return RngState(self.seed, _path=f"{self.path}/{label}")


def rng_fork(rng: RngState, label: str) -> RngState:
    return rng.fork(label)


# ---------------------------------------------------------------------------
# Trajectory logs: one record per step, reproducible byte-for-byte per seed.
# ---------------------------------------------------------------------------

def write_trajectory_log(trajs: list[Trajectory], path_or_buf) -> None:
    """Write episodes as delimited text: episode,t,obs...,action,reward,done."""
    own = isinstance(path_or_buf, str)
    f = open(path_or_buf, "w") if own else path_or_buf
    try:
        if not trajs:
            f.write("episode,t,action,reward,done\n")
            return
        dim = len(trajs[0].steps[0].obs)
        cols = ",".join(f"obs{i}" for i in range(dim))
        f.write(f"episode,t,{cols},action,reward,done\n")
        for traj in trajs:
            for t, s in enumerate(traj.steps):
                obs = ",".join(repr(float(v)) for v in s.obs)
                f.write(f"{traj.episode_index},{t},{obs},{s.action},{repr(float(s.reward))},{int(s.done)}\n")
    finally:
        if own:
            f.close()


def read_trajectory_log(path_or_buf) -> list[Trajectory]:
    own = isinstance(path_or_buf, str)
    f = open(path_or_buf) if own else path_or_buf
    try:
        header = f.readline().strip().split(",")
        dim = sum(1 for c in header if c.startswith("obs"))
        trajs: list[Trajectory] = []
        current: list[Step] = []
        episode = None
        for line in f:
            parts = line.strip().split(",")
            ep = int(parts[0])
            if episode is not None and ep != episode:
                trajs.append(Trajectory(steps=current, episode_index=episode))
                current = []
            episode = ep
            obs = np.array([float(v) for v in parts[2:2 + dim]], dtype=np.float64)
            current.append(Step(obs=obs, action=int(parts[2 + dim]),
                                reward=float(parts[3 + dim]), done=bool(int(parts[4 + dim]))))
        if current:
            trajs.append(Trajectory(steps=current, episode_index=episode))
        return trajs
    finally:
        if own:
            f.close()


def log_to_string(trajs: list[Trajectory]) -> str:
    buf = io.StringIO()
    write_trajectory_log(trajs, buf)
    return buf.getvalue()
