import numpy as np
import pytest

from revrl import nn
from revrl import oracle as O
from revrl.core import ReplayBuffer, RngState, Step, Trajectory
from revrl.envs.tabular import flip_flop, one_way_chain
from revrl.precedence import (
    precedence_model,
    psi_eval,
    sample_pair,
    sample_pair_batch,
    train_precedence,
)


def seq_trajectory(states, obs, episode=0):
    steps = [Step(obs=obs[s], action=0, reward=0.0, done=i == len(states) - 1)
             for i, s in enumerate(states)]
    return Trajectory(steps=steps, episode_index=episode)


def chain_buffer(n=10, episodes=50):
    obs = np.eye(n)
    buf = ReplayBuffer(capacity=100_000)
    for ep in range(episodes):
        buf.push(seq_trajectory(list(range(n)), obs, ep))
    return buf, obs


# --- sampling ----------------------------------------------------------------

def test_length_two_trajectory_yields_the_single_pair_both_ways():
    obs = np.eye(2)
    traj = seq_trajectory([0, 1], obs)
    rng = RngState(0).fork("s")
    labels = []
    for _ in range(2000):
        pair = sample_pair(traj, w=5, rng=rng)
        assert pair.gap == 1
        if pair.label == 1:
            assert np.array_equal(pair.first, obs[0]) and np.array_equal(pair.second, obs[1])
        else:
            assert np.array_equal(pair.first, obs[1]) and np.array_equal(pair.second, obs[0])
        labels.append(pair.label)
    # swap is a fair coin
    assert abs(np.mean(labels) - 0.5) < 3 * 0.5 / np.sqrt(2000)


def test_window_one_forces_consecutive_observations():
    obs = np.eye(8)
    traj = seq_trajectory(list(range(8)), obs)
    rng = RngState(1).fork("s")
    for _ in range(300):
        pair = sample_pair(traj, w=1, rng=rng)
        assert pair.gap == 1
        i = int(np.argmax(pair.first))
        j = int(np.argmax(pair.second))
        assert abs(i - j) == 1


def test_gap_always_within_window():
    obs = np.eye(12)
    traj = seq_trajectory(list(range(12)), obs)
    rng = RngState(2).fork("s")
    for w in (1, 3, 7):
        for _ in range(200):
            pair = sample_pair(traj, w=w, rng=rng)
            assert 1 <= pair.gap <= w


def test_label_mean_is_balanced_over_many_samples():
    buf, _ = chain_buffer(n=6, episodes=20)
    rng = RngState(3).fork("s")
    _, _, labels = sample_pair_batch(list(buf.trajectories), w=5, batch_size=100_000, rng=rng)
    sigma = 0.5 / np.sqrt(100_000)
    assert abs(labels.mean() - 0.5) < 3 * sigma


def test_pairs_never_span_trajectories():
    # two trajectories with disjoint observation supports
    obs = np.eye(4)
    t1 = seq_trajectory([0, 1], obs, 0)
    t2 = seq_trajectory([2, 3], obs, 1)
    rng = RngState(4).fork("s")
    X1, X2, _ = sample_pair_batch([t1, t2], w=5, batch_size=5000, rng=rng)
    first_group = np.argmax(X1, axis=1) // 2
    second_group = np.argmax(X2, axis=1) // 2
    assert np.array_equal(first_group, second_group)


def test_sampling_is_reproducible_from_the_stream():
    buf, _ = chain_buffer(n=5, episodes=3)
    a = sample_pair_batch(list(buf.trajectories), w=4, batch_size=64, rng=RngState(9).fork("x"))
    b = sample_pair_batch(list(buf.trajectories), w=4, batch_size=64, rng=RngState(9).fork("x"))
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_too_short_trajectory_rejected():
    obs = np.eye(2)
    traj = seq_trajectory([0], obs)
    with pytest.raises(ValueError):
        sample_pair(traj, w=3, rng=RngState(0).fork("s"))


# --- evaluation and training ---------------------------------------------------

def test_untrained_zeroed_head_outputs_half():
    model = precedence_model(4, RngState(5).fork("m"))
    for p in model.head.params():
        p[:] = 0.0
    x = RngState(6).gen.normal(size=4)
    x2 = RngState(7).gen.normal(size=4)
    assert psi_eval(model, x, x2) == pytest.approx(0.5)


def test_zero_training_steps_leaves_model_unchanged():
    buf, _ = chain_buffer()
    model = precedence_model(10, RngState(8).fork("m"))
    before = [p.copy() for p in model.params()]
    opt = nn.AdamState(model.params(), lr=0.01)
    train_precedence(model, buf, w=10, batch_size=32, steps=0,
                     optimizer=opt, rng=RngState(9).fork("t"))
    assert all(np.array_equal(a, b) for a, b in zip(before, model.params()))


def test_training_on_one_way_chain_recovers_exact_order():
    # ground truth from the exact oracle: all later states follow earlier ones
    mdp = one_way_chain(10)
    pi = O.uniform_policy(mdp)
    assert O.exact_psi(mdp, pi, 2, 7) == 1.0

    buf, obs = chain_buffer(n=10, episodes=50)
    rng = RngState(10)
    model = precedence_model(10, rng.fork("m"))
    opt = nn.AdamState(model.params(), lr=0.01)
    model, trace = train_precedence(model, buf, w=10, batch_size=128, steps=2000,
                                    optimizer=opt, rng=rng.fork("t"))
    final_bce = np.mean([r[1] for r in trace.records[-100:]])
    assert final_bce < 0.1
    for i, j in [(0, 5), (2, 7), (1, 9), (3, 4)]:
        assert psi_eval(model, obs[i], obs[j]) > 0.95
        assert psi_eval(model, obs[j], obs[i]) < 0.05


def test_training_on_symmetric_alternation_stays_near_half():
    # the exact oracle gives 1/2 by symmetry of the pair counts
    mdp = flip_flop()
    assert O.exact_psi(mdp, O.uniform_policy(mdp), 0, 1) == pytest.approx(0.5)

    obs = np.eye(2)
    rng = RngState(11)
    buf = ReplayBuffer(capacity=100_000)
    for ep in range(60):
        start = int(rng.fork(f"s{ep}").gen.integers(0, 2))
        buf.push(seq_trajectory([(start + i) % 2 for i in range(12)], obs, ep))
    model = precedence_model(2, rng.fork("m"))
    opt = nn.AdamState(model.params(), lr=0.01)
    model, _ = train_precedence(model, buf, w=12, batch_size=128, steps=1500,
                                optimizer=opt, rng=rng.fork("t"))
    opt.lr = 0.001
    model, _ = train_precedence(model, buf, w=12, batch_size=128, steps=500,
                                optimizer=opt, rng=rng.fork("t2"))
    assert 0.4 <= psi_eval(model, obs[0], obs[1]) <= 0.6


def test_unpredictable_data_converges_to_coin_flip_loss():
    # iid observations carry no order signal: best loss is ln 2
    rng = RngState(12)
    buf = ReplayBuffer(capacity=1_000_000)
    for ep in range(200):
        draws = rng.fork(f"o{ep}").gen.normal(size=(40, 4))
        steps = [Step(obs=draws[i], action=0, reward=0.0, done=i == 39) for i in range(40)]
        buf.push(Trajectory(steps=steps, episode_index=ep))
    model = precedence_model(4, rng.fork("m"))
    opt = nn.AdamState(model.params(), lr=0.01)
    model, trace = train_precedence(model, buf, w=40, batch_size=128, steps=1500,
                                    optimizer=opt, rng=rng.fork("t"))
    tail = np.mean([r[1] for r in trace.records[-200:]])
    assert abs(tail - np.log(2.0)) < 0.05
