"""Self-supervised temporal-order estimation.

Pairs of observations at most `w` timesteps apart are drawn from stored
trajectories and shuffled; a Siamese embedder plus a scalar head is trained
by binary cross-entropy to recover the original order. The trained network
outputs, for a pair (x, x2), the probability that x2 is observed after x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .core import Observation, ReplayBuffer, RngState, Trajectory


@dataclass
class PrecedencePair:
    first: Observation
    second: Observation
    label: int   # 1 iff (first, second) is the true temporal order
    gap: int     # timesteps between the two observations, 1..w


@dataclass
class PrecedenceModel:
    """Shared Siamese trunk + linear head; sigmoid applied at evaluation."""

    embedder: nn.DenseNet
    head: nn.DenseNet

    def params(self) -> list[np.ndarray]:
        return self.embedder.params() + self.head.params()

    def copy(self) -> "PrecedenceModel":
        return PrecedenceModel(self.embedder.copy(), self.head.copy())


def precedence_model(obs_dim: int, rng: RngState, hidden: int = 64) -> PrecedenceModel:
    embedder = nn.dense_net([obs_dim, hidden, hidden], ["relu", "relu"], rng.fork("embedder"))
    head = nn.dense_net([2 * hidden, 1], ["identity"], rng.fork("head"))
    return PrecedenceModel(embedder=embedder, head=head)


def _pair_logits(model: PrecedenceModel, X1: np.ndarray, X2: np.ndarray):
    e1, c1 = nn.forward(model.embedder, X1)
    e2, c2 = nn.forward(model.embedder, X2)
    h = np.concatenate([np.atleast_2d(e1), np.atleast_2d(e2)], axis=1)
    z, ch = nn.forward(model.head, h)
    return np.atleast_2d(z)[:, 0], (c1, c2, ch)


def psi_eval(model: PrecedenceModel, x: Observation, x2: Observation) -> float:
    """Probability that x2 comes after x, in (0, 1)."""
    z, _ = _pair_logits(model, x[None, :], x2[None, :])
    return float(nn.sigmoid(z)[0])


def psi_eval_batch(model: PrecedenceModel, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    z, _ = _pair_logits(model, X1, X2)
    return nn.sigmoid(z)


# ---------------------------------------------------------------------------
# Pair sampling
# ---------------------------------------------------------------------------

def _n_pairs(length: int, w: int) -> int:
    # number of (t, t') with t < t' and t' - t <= w among `length` observations
    m = min(w, length - 1)
    if m <= 0:
        return 0
    return m * length - m * (m + 1) // 2


def _gap_cumulative(length: int, w: int) -> np.ndarray:
    m = min(w, length - 1)
    return np.cumsum(np.arange(length - 1, length - 1 - m, -1))


def sample_pair(traj: Trajectory, w: int, rng: RngState,
                include_final: bool = False) -> PrecedencePair:
    """Draw one shuffled pair, uniform over admissible index pairs."""
    obs = traj.observations(include_final=include_final)
    length = obs.shape[0]
    if length < 2:
        raise ValueError("trajectory too short to sample a pair")
    cum = _gap_cumulative(length, w)
    u = int(rng.gen.integers(0, cum[-1]))
    gap = int(np.searchsorted(cum, u, side="right")) + 1
    t = int(rng.gen.integers(0, length - gap))
    swap = bool(rng.gen.random() < 0.5)
    first, second = (obs[t + gap], obs[t]) if swap else (obs[t], obs[t + gap])
    return PrecedencePair(first=first, second=second, label=0 if swap else 1, gap=gap)


class PairSampler:
    """Prepared uniform sampler over all admissible pairs in a trajectory set.

    Building the stacked-observation index once and reusing it across
    minibatches is what keeps training cheap on buffers with very many
    episodes.
    """

    def __init__(self, trajs: list[Trajectory], w: int, include_final: bool = False):
        self.w = w
        self.stacks = [t.observations(include_final=include_final) for t in trajs]
        lens = np.array([s.shape[0] for s in self.stacks])
        counts = np.array([_n_pairs(int(n), w) for n in lens], dtype=np.int64)
        if counts.sum() == 0:
            raise ValueError("no trajectory long enough to sample pairs from")
        self.cum = np.cumsum(counts)
        self.dim = self.stacks[0].shape[1]
        self._gap_cache: dict[int, np.ndarray] = {}

    def sample(self, batch_size: int, rng: RngState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (X1, X2, labels): label 1 means the pair is in true order."""
        ks = rng.gen.integers(0, self.cum[-1], size=batch_size)
        traj_idx = np.searchsorted(self.cum, ks, side="right")
        X1 = np.empty((batch_size, self.dim))
        X2 = np.empty((batch_size, self.dim))
        swaps = rng.gen.random(batch_size) < 0.5
        gap_u = rng.gen.random(batch_size)
        pos_u = rng.gen.random(batch_size)
        for i, ti in enumerate(traj_idx):
            obs = self.stacks[ti]
            length = obs.shape[0]
            gcum = self._gap_cache.get(length)
            if gcum is None:
                gcum = _gap_cumulative(length, self.w)
                self._gap_cache[length] = gcum
            u = int(gap_u[i] * gcum[-1])
            gap = int(np.searchsorted(gcum, u, side="right")) + 1
            t = int(pos_u[i] * (length - gap))
            if swaps[i]:
                X1[i] = obs[t + gap]
                X2[i] = obs[t]
            else:
                X1[i] = obs[t]
                X2[i] = obs[t + gap]
        labels = (~swaps).astype(np.float64)
        return X1, X2, labels


def sample_pair_batch(trajs: list[Trajectory], w: int, batch_size: int, rng: RngState,
                      include_final: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-shot batch sampling; prefer PairSampler for repeated draws."""
    return PairSampler(trajs, w, include_final=include_final).sample(batch_size, rng)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class LossTrace:
    records: list[tuple[int, float, float]] = field(default_factory=list)  # (update, bce, acc)

    def add(self, update: int, bce: float, accuracy: float) -> None:
        self.records.append((update, bce, accuracy))

    def to_csv(self, path: str) -> None:
        with open(path, "w") as f:
            f.write("update_index,bce_loss,label_accuracy\n")
            for u, b, a in self.records:
                f.write(f"{u},{b!r},{a!r}\n")


def bce_with_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Numerically stable binary cross-entropy; returns (loss, d loss/d z)."""
    loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    grad = (nn.sigmoid(z) - y) / z.shape[0]
    return loss, grad


def precedence_update(model: PrecedenceModel, X1: np.ndarray, X2: np.ndarray,
                      labels: np.ndarray, optimizer: nn.AdamState) -> tuple[float, float]:
    """One minibatch gradient step; returns (bce, label accuracy)."""
    z, (c1, c2, ch) = _pair_logits(model, X1, X2)
    loss, gz = bce_with_logits(z, labels)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite precedence loss")
    head_grads, gh = nn.backward(model.head, ch, gz[:, None])
    emb_dim = model.embedder.out_dim
    g1, _ = nn.backward(model.embedder, c1, gh[:, :emb_dim])
    g2, _ = nn.backward(model.embedder, c2, gh[:, emb_dim:])
    emb_grads = [a + b for a, b in zip(g1, g2)]
    nn.adam_step(optimizer, model.params(), emb_grads + head_grads)
    acc = float(np.mean((z > 0.0) == (labels > 0.5)))
    return loss, acc


def train_precedence(model: PrecedenceModel, buffer: ReplayBuffer, w: int,
                     batch_size: int, steps: int, optimizer: nn.AdamState,
                     rng: RngState, include_final: bool = False,
                     trace: LossTrace | None = None) -> tuple[PrecedenceModel, LossTrace]:
    """Run `steps` shuffled-pair classification updates from the buffer."""
    if trace is None:
        trace = LossTrace()
    if steps <= 0:
        return model, trace
    trajs = [t for t in buffer.trajectories
             if t.observations(include_final=include_final).shape[0] >= 2]
    if not trajs:
        raise ValueError("buffer holds no trajectory with at least two observations")
    sampler = PairSampler(trajs, w, include_final=include_final)
    start = len(trace.records)
    for i in range(steps):
        X1, X2, labels = sampler.sample(batch_size, rng)
        loss, acc = precedence_update(model, X1, X2, labels, optimizer)
        trace.add(start + i, loss, acc)
    return model, trace
