import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revrl.core import (
    ReplayBuffer,
    RngState,
    Step,
    Trajectory,
    buffer_push,
    log_to_string,
    read_trajectory_log,
    rng_fork,
)


def make_traj(n_steps, episode=0, dim=3, fill=0.0):
    steps = [Step(obs=np.full(dim, fill + t), action=t % 2, reward=1.0, done=t == n_steps - 1)
             for t in range(n_steps)]
    return Trajectory(steps=steps, episode_index=episode, final_obs=np.full(dim, -1.0))


def test_push_into_empty_buffer():
    buf = ReplayBuffer(capacity=100)
    buffer_push(buf, make_traj(20))
    assert buf.total_steps == 20
    assert len(buf) == 1


def test_push_evicts_whole_oldest_trajectories():
    buf = ReplayBuffer(capacity=100)
    for ep in range(5):
        buffer_push(buf, make_traj(19, episode=ep))  # 95 steps total
    buffer_push(buf, make_traj(20, episode=5))
    assert buf.total_steps <= 100
    # eviction is whole-trajectory and oldest-first
    assert [t.episode_index for t in buf.trajectories] == [1, 2, 3, 4, 5]


def test_large_capacity_never_evicts_over_long_run():
    buf = ReplayBuffer(capacity=1_000_000)
    pushed = 0
    for ep in range(1500):
        buf.push(make_traj(200, episode=ep, dim=1))
        pushed += 200
    assert buf.total_steps == pushed  # 300k steps, no eviction


def test_empty_trajectory_rejected():
    buf = ReplayBuffer(capacity=10)
    with pytest.raises(ValueError):
        buf.push(Trajectory(steps=[]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=30), min_size=1, max_size=40),
       st.integers(min_value=30, max_value=120))
def test_step_count_never_exceeds_capacity(lengths, capacity):
    buf = ReplayBuffer(capacity=capacity)
    for ep, n in enumerate(lengths):
        buf.push(make_traj(n, episode=ep, dim=1))
        assert buf.total_steps <= capacity


def test_done_only_on_final_step_enforced():
    steps = [Step(obs=np.zeros(2), action=0, reward=0.0, done=True),
             Step(obs=np.zeros(2), action=0, reward=0.0, done=True)]
    with pytest.raises(ValueError):
        Trajectory(steps=steps).validate()


def test_rng_same_seed_and_label_reproduces_stream():
    a = rng_fork(RngState(7), "env")
    b = rng_fork(RngState(7), "env")
    assert np.array_equal(a.gen.random(10), b.gen.random(10))


def test_rng_distinct_labels_give_distinct_streams():
    a = RngState(7).fork("env")
    b = RngState(7).fork("agent")
    assert not np.array_equal(a.gen.random(10), b.gen.random(10))


def test_rng_distinct_seeds_give_distinct_streams():
    a = RngState(7).fork("env")
    b = RngState(8).fork("env")
    assert not np.array_equal(a.gen.random(10), b.gen.random(10))


def test_rng_fork_requires_label():
    with pytest.raises(ValueError):
        RngState(1).fork("")


def test_trajectory_log_round_trip_and_determinism():
    trajs = [make_traj(4, episode=0), make_traj(2, episode=1, fill=10.0)]
    text1 = log_to_string(trajs)
    text2 = log_to_string(trajs)
    assert text1 == text2  # byte-identical
    back = read_trajectory_log(io.StringIO(text1))
    assert len(back) == 2
    assert len(back[0].steps) == 4
    for orig, rt in zip(trajs, back):
        for s, s2 in zip(orig.steps, rt.steps):
            assert np.array_equal(s.obs, s2.obs)
            assert (s.action, s.reward, s.done) == (s2.action, s2.reward, s2.done)


def test_observations_include_final_appends_row():
    traj = make_traj(3)
    assert traj.observations().shape == (3, 3)
    assert traj.observations(include_final=True).shape == (4, 3)
    assert np.array_equal(traj.observations(include_final=True)[-1], np.full(3, -1.0))
