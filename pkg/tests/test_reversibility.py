import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revrl import nn
from revrl import oracle as O
from revrl.core import ReplayBuffer, RngState, Step, Trajectory
from revrl.envs import CartpoleEnv, TurfEnv, mdp_step, two_action_chain
from revrl.precedence import precedence_model
from revrl.reversibility import (
    RACConfig,
    RAEConfig,
    phi_eval,
    rac_filter,
    rae_reward,
    reversibility_model,
    train_reversibility,
    wrap_env_rae,
)


def rigged_psi(obs_dim: int, value: float):
    """Precedence model that outputs `value` for every pair."""
    model = precedence_model(obs_dim, RngState(99).fork("m"))
    for p in model.head.params():
        p[:] = 0.0
    model.head.layers[0].b[0] = np.log(value / (1.0 - value))
    return model


# --- penalty shape --------------------------------------------------------------

def test_penalty_above_threshold_scales_with_psi():
    assert rae_reward(0.9, RAEConfig(beta=0.8, lam=0.1)) == pytest.approx(-0.09)


def test_penalty_below_threshold_is_zero():
    assert rae_reward(0.5, RAEConfig(beta=0.8, lam=0.1)) == 0.0


def test_penalty_extremes():
    assert rae_reward(1.0, RAEConfig(beta=0.0, lam=1.0)) == pytest.approx(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.99), st.floats(0.0, 5.0))
def test_penalty_nonpositive_and_zero_below_threshold(psi, beta, lam):
    r = rae_reward(psi, RAEConfig(beta=beta, lam=lam))
    assert r <= 0.0
    if psi <= beta:
        assert r == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.1, 5.0),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_penalty_magnitude_monotone_in_psi(beta, lam, a, b):
    lo, hi = sorted((a, b))
    cfg = RAEConfig(beta=beta, lam=lam)
    if lo > beta:
        assert abs(rae_reward(hi, cfg)) >= abs(rae_reward(lo, cfg))


# --- rejection filter -------------------------------------------------------------

def test_filter_rejects_low_scores_and_renormalizes():
    out = rac_filter(np.array([0.5, 0.5]), np.array([0.9, 0.1]), RACConfig(beta=0.2))
    assert np.allclose(out, [1.0, 0.0])


def test_filter_is_identity_when_everything_passes():
    probs = np.array([0.2, 0.3, 0.5])
    out = rac_filter(probs, np.array([0.9, 0.8, 0.7]), RACConfig(beta=0.5))
    assert np.allclose(out, probs)


def test_filter_fallback_when_all_rejected():
    out = rac_filter(np.array([0.5, 0.5]), np.array([0.1, 0.15]), RACConfig(beta=0.2))
    assert np.allclose(out, [0.0, 1.0])


def test_filter_with_zero_threshold_is_identity():
    probs = np.array([0.25, 0.75])
    out = rac_filter(probs, np.array([0.0, 0.9]), RACConfig(beta=0.0))
    assert np.allclose(out, probs)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.floats(0.01, 0.99), st.integers(0, 10_000))
def test_filter_output_is_a_distribution_zero_on_rejected(n, beta, seed):
    gen = np.random.default_rng(seed)
    probs = gen.dirichlet(np.ones(n))
    phi = gen.random(n)
    out = rac_filter(probs, phi, RACConfig(beta=beta))
    assert abs(out.sum() - 1.0) < 1e-9
    if np.any(phi >= beta):
        assert np.all(out[phi < beta] == 0.0)


def test_filter_validates_input_distribution():
    with pytest.raises(ValueError):
        rac_filter(np.array([0.5, 0.6]), np.array([0.9, 0.9]), RACConfig(beta=0.1))


# --- estimator -----------------------------------------------------------------

def test_zero_initialized_scores_are_half():
    model = reversibility_model(5, 3, RngState(0).fork("m"))
    for p in model.params():
        p[:] = 0.0
    assert np.allclose(phi_eval(model, np.ones(5)), 0.5)


def chain_buffer(rng, n=6, episodes=100, length=20):
    mdp = two_action_chain(n)
    obs = np.eye(n)
    buf = ReplayBuffer(capacity=100_000)
    for ep in range(episodes):
        r = rng.fork(f"t{ep}")
        s = 0
        steps = []
        for i in range(length):
            a = int(r.gen.integers(0, 2))
            steps.append(Step(obs=obs[s], action=a, reward=0.0, done=i == length - 1))
            s = mdp_step(mdp, s, a, r)
        buf.push(Trajectory(steps=steps, episode_index=ep, final_obs=obs[s]))
    return buf, obs, mdp


def test_constant_targets_are_fit_exactly():
    rng = RngState(1)
    buf, obs, _ = chain_buffer(rng)
    psi = rigged_psi(6, 0.5)
    model = reversibility_model(6, 2, rng.fork("m"))
    opt = nn.AdamState(model.params(), lr=0.01)
    train_reversibility(model, buf, psi, batch_size=128, steps=1500,
                        optimizer=opt, rng=rng.fork("t"))
    scores = np.stack([phi_eval(model, obs[s]) for s in range(6)])
    assert float(np.mean((scores - 0.5) ** 2)) < 1e-3


def test_chain_actions_split_by_undoability():
    # exact oracle: the advancing action can never be undone (return
    # precedence 0); staying put is trivially undone (same-state pair, 1/2)
    rng = RngState(2)
    buf, obs, mdp = chain_buffer(rng)
    pi = O.uniform_policy(mdp)
    assert O.exact_psi(mdp, pi, 1, 0) == 0.0
    assert O.exact_psi(mdp, pi, 0, 0) == 0.5

    from revrl.precedence import train_precedence
    psi = precedence_model(6, rng.fork("psi"))
    popt = nn.AdamState(psi.params(), lr=0.01)
    train_precedence(psi, buf, w=20, batch_size=128, steps=3000,
                     optimizer=popt, rng=rng.fork("pt"))
    popt.lr = 0.001
    train_precedence(psi, buf, w=20, batch_size=128, steps=2000,
                     optimizer=popt, rng=rng.fork("pt2"))

    model = reversibility_model(6, 2, rng.fork("m"))
    opt = nn.AdamState(model.params(), lr=0.01)
    train_reversibility(model, buf, psi, batch_size=128, steps=1500,
                        optimizer=opt, rng=rng.fork("t"))
    opt.lr = 0.001
    train_reversibility(model, buf, psi, batch_size=128, steps=500,
                        optimizer=opt, rng=rng.fork("t2"))
    scores = np.stack([phi_eval(model, obs[s]) for s in range(4)])
    advance, stay = scores[:, 0], scores[:, 1]
    assert np.all(advance < 0.1)
    assert np.all((stay > 0.3) & (stay < 0.7))
    # the rejection filter at the usual threshold separates them
    for s in range(4):
        out = rac_filter(np.array([0.5, 0.5]), scores[s], RACConfig(beta=0.2))
        assert out[0] == 0.0 and out[1] == 1.0


def test_zero_steps_leaves_model_unchanged():
    rng = RngState(3)
    buf, _, _ = chain_buffer(rng, episodes=5)
    psi = rigged_psi(6, 0.5)
    model = reversibility_model(6, 2, rng.fork("m"))
    before = [p.copy() for p in model.params()]
    opt = nn.AdamState(model.params(), lr=0.01)
    train_reversibility(model, buf, psi, batch_size=16, steps=0,
                        optimizer=opt, rng=rng.fork("t"))
    assert all(np.array_equal(a, b) for a, b in zip(before, model.params()))


# --- reward wrapper ---------------------------------------------------------------

def test_reward_free_cartpole_with_reversible_transitions_gets_zero():
    env = CartpoleEnv(reward_free=True)
    wrapped = wrap_env_rae(env, rigged_psi(4, 0.5), RAEConfig(beta=0.8, lam=0.1))
    wrapped.reset(RngState(4).fork("e"))
    _, reward, _, info = wrapped.step(1)
    assert reward == 0.0 and info["intrinsic"] == 0.0


def test_turf_grass_step_is_penalized_through_wrapper():
    env = TurfEnv()
    wrapped = wrap_env_rae(env, rigged_psi(env.obs_dim, 0.9), RAEConfig(beta=0.8, lam=0.1))
    wrapped.reset(RngState(5).fork("e"))
    _, reward, _, info = wrapped.step(0)  # up from the start is grass
    assert info["irreversible"]
    assert reward == pytest.approx(-0.09)


def test_turf_goal_reward_passes_through_when_reversible():
    env = TurfEnv()
    wrapped = wrap_env_rae(env, rigged_psi(env.obs_dim, 0.5), RAEConfig(beta=0.8, lam=0.1))
    wrapped.reset(RngState(6).fork("e"))
    for action in [3, 3, 3, 3, 3, 3, 1, 1, 1, 2, 2, 2, 2, 2, 1, 1, 1, 1]:
        obs, reward, done, info = wrapped.step(action)
        if done:
            break
    assert done and reward == pytest.approx(1.0)
