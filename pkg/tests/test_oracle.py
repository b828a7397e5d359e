import numpy as np
import pytest

from revrl import oracle as O
from revrl.core import RngState
from revrl.envs.tabular import (
    TabularMDP,
    flip_flop,
    one_way_chain,
    random_mdp,
    three_cycle,
    turf_tabular,
    two_action_chain,
)


def single_state_mdp():
    return TabularMDP(P=np.ones((1, 1, 1)), mu0=np.array([1.0]))


# --- pair counts and finite-horizon precedence -------------------------------

def test_doubling_counts_match_direct_matrix_powers():
    rng = RngState(3)
    for trial in range(6):
        mdp = random_mdp(int(rng.fork(f"n{trial}").gen.integers(2, 7)), 3, rng.fork(f"m{trial}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"p{trial}"))
        eng = O._DoublingCounts(mdp, pi)
        for _ in range(6):
            T, C = eng.advance()
            direct = O.pair_counts(mdp, pi, T)
            assert np.allclose(C, direct, rtol=1e-11, atol=1e-11)


def test_same_state_pair_is_half():
    mdp = flip_flop()
    pi = O.uniform_policy(mdp)
    assert O.exact_psi_T(mdp, pi, 0, 0, 6) == pytest.approx(0.5)


def test_absorbing_two_state_chain_at_T3():
    # trajectory is deterministically 0,1,1: two (0->1) pairs, zero (1->0)
    mdp = one_way_chain(2)
    pi = O.uniform_policy(mdp)
    assert O.exact_psi_T(mdp, pi, 0, 1, 3) == pytest.approx(1.0)


def test_cycle_counterexample_reproduced():
    report, vals = O.cycle_counterexample(T=999)
    assert report.passed
    assert vals["psi_01"] > 0.5 and vals["psi_12"] > 0.5 and vals["psi_20"] > 0.5
    assert vals["psi_02"] < 0.5
    # closed form of the finite-horizon bias for T = 3m on the cycle
    m = 999 // 3
    assert vals["psi_01"] == pytest.approx((3 * m + 1) / (6 * m), abs=1e-12)


def test_undefined_pair_raises():
    # two disjoint absorbing states can never co-occur
    P = np.zeros((2, 1, 2))
    P[0, 0, 0] = 1.0
    P[1, 0, 1] = 1.0
    mdp = TabularMDP(P=P, mu0=np.array([0.5, 0.5]))
    pi = O.uniform_policy(mdp)
    with pytest.raises(O.UndefinedPairError):
        O.exact_psi_T(mdp, pi, 0, 1, 8)


# --- windowed variant ---------------------------------------------------------

def test_window_at_least_horizon_equals_unwindowed():
    rng = RngState(4)
    mdp = random_mdp(4, 2, rng.fork("m"))
    pi = O.uniform_policy(mdp)
    full = O.exact_psi_T(mdp, pi, 0, 2, 12)
    assert O.exact_psi_windowed(mdp, pi, 0, 2, 12, w=12) == pytest.approx(full, abs=1e-12)
    assert O.exact_psi_windowed(mdp, pi, 0, 2, 12, w=11) == pytest.approx(full, abs=1e-12)


def test_window_one_counts_adjacent_pairs_only():
    # flip-flop started at 0: with w=1 the pair counts are the number of
    # adjacent (0,1) and (1,0) slots: ceil((T-1)/2) vs floor((T-1)/2)
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = 1.0
    mdp = TabularMDP(P=P, mu0=np.array([1.0, 0.0]))
    pi = O.uniform_policy(mdp)
    assert O.exact_psi_windowed(mdp, pi, 0, 1, T=4, w=1) == pytest.approx(2.0 / 3.0)
    assert O.exact_psi_windowed(mdp, pi, 0, 1, T=5, w=1) == pytest.approx(0.5)


def test_one_way_chain_windowed_is_one():
    mdp = one_way_chain(5)
    pi = O.uniform_policy(mdp)
    assert O.exact_psi_windowed(mdp, pi, 1, 2, T=10, w=1) == pytest.approx(1.0)
    for w in (2, 4):
        assert O.exact_psi_windowed(mdp, pi, 1, 3, T=10, w=w) == pytest.approx(1.0)


# --- limits -------------------------------------------------------------------

def test_limit_on_irreducible_chain_is_half():
    rng = RngState(6)
    mdp = random_mdp(5, 3, rng.fork("m"))
    pi = O.eps_mixed_policy(mdp, rng.fork("p"))
    psi, defined, _ = O.psi_limit_matrix(mdp, pi, tol=1e-9)
    assert defined.all()
    assert np.max(np.abs(psi - 0.5)) < 1e-9


def test_limit_transient_before_absorbing_is_one():
    mdp = one_way_chain(3)
    pi = O.uniform_policy(mdp)
    assert O.exact_psi(mdp, pi, 0, 2) == pytest.approx(1.0)
    assert O.exact_psi(mdp, pi, 2, 0) == pytest.approx(0.0)


def test_limit_matches_monte_carlo_of_the_sampled_definition():
    # randomized cross-check at matching finite horizon
    rng = RngState(8)
    mdp = random_mdp(5, 2, rng.fork("m"))
    pi = O.eps_mixed_policy(mdp, rng.fork("p"))
    T = 24
    exact = O.exact_psi_T(mdp, pi, 1, 3, T)
    est, se = O.monte_carlo_psi(mdp, pi, 1, 3, T, n_traj=100_000, rng=rng.fork("mc"))
    assert abs(est - exact) < 3.0 * se + 1e-12


def test_pair_sum_identity_holds_exactly():
    rng = RngState(9)
    mdp = random_mdp(6, 2, rng.fork("m"))
    pi = O.eps_mixed_policy(mdp, rng.fork("p"))
    psi, defined, _ = O.psi_limit_matrix(mdp, pi, tol=1e-9)
    both = defined & defined.T
    assert np.max(np.abs((psi + psi.T)[both] - 1.0)) < 1e-12


# --- return probabilities ------------------------------------------------------

def test_phi_pi_self_transition_is_one():
    mdp = two_action_chain(3)
    pi = O.uniform_policy(mdp)
    assert O.exact_phi_pi(mdp, pi, 1, 1) == pytest.approx(1.0)  # action 1 stays put


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7, 1.0])
def test_phi_pi_hand_solved_return_chain(q):
    # action sends 0 -> 1; from 1 the policy returns to 0 w.p. q, else traps
    P = np.zeros((3, 1, 3))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = q
    P[1, 0, 2] = 1.0 - q
    P[2, 0, 2] = 1.0
    mdp = TabularMDP(P=P, mu0=np.array([1.0, 0.0, 0.0]))
    pi = O.uniform_policy(mdp)
    assert O.exact_phi_pi(mdp, pi, 0, 0) == pytest.approx(q, abs=1e-12)


def test_phi_pi_absorbing_elsewhere_is_zero():
    mdp = one_way_chain(3)
    pi = O.uniform_policy(mdp)
    assert O.exact_phi_pi(mdp, pi, 0, 0) == pytest.approx(0.0)


def test_phi_K_one_step_is_immediate_return_probability():
    # an inverse move exists, but the undo itself takes one extra step:
    # within one step the only way back is an immediate self-transition
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = 1.0  # move
    P[0, 1, 0] = 1.0
    P[1, 0, 0] = 1.0  # inverse move
    P[1, 1, 1] = 1.0
    mdp = TabularMDP(P=P, mu0=np.array([1.0, 0.0]))
    assert O.exact_phi_K(mdp, 0, 0, K=1) == pytest.approx(0.0)
    assert O.exact_phi_K(mdp, 0, 0, K=2) == pytest.approx(1.0)
    assert O.exact_phi(mdp, 0, 0) == pytest.approx(1.0)


def test_phi_K_monotone_and_dominated_by_phi():
    rng = RngState(10)
    for trial in range(50):
        mdp = random_mdp(int(rng.fork(f"n{trial}").gen.integers(2, 7)),
                         int(rng.fork(f"a{trial}").gen.integers(1, 4)),
                         rng.fork(f"m{trial}"))
        s = int(rng.fork(f"s{trial}").gen.integers(0, mdp.n_states))
        a = int(rng.fork(f"act{trial}").gen.integers(0, mdp.n_actions))
        phis = [O.exact_phi_K(mdp, s, a, K) for K in range(1, 6)]
        assert all(b >= a2 - 1e-12 for a2, b in zip(phis, phis[1:]))
        assert O.exact_phi(mdp, s, a) >= phis[-1] - 1e-12


def test_phi_dominates_policy_return_probability():
    rng = RngState(11)
    for trial in range(20):
        mdp = random_mdp(5, 3, rng.fork(f"m{trial}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"p{trial}"))
        for s in range(5):
            for a in range(3):
                assert O.exact_phi(mdp, s, a) >= O.exact_phi_pi(mdp, pi, s, a) - 1e-9


def test_turf_grass_step_is_irreversible_in_exact_model():
    small = "GAPG\nGGPG\nGGTG\n"
    mdp, states, goal = turf_tabular(small)
    # find the grass-stepping action from the start: up from (0,1)? start=(0,1)
    start_pos, spoiled = states[0]
    for a, (dr, dc) in enumerate(((-1, 0), (1, 0), (0, -1), (0, 1))):
        r, c = start_pos[0] + dr, start_pos[1] + dc
        r = min(max(r, 0), 2)
        c = min(max(c, 0), 3)
        from revrl.envs.turf import GRASS, parse_turf_map
        cells, _ = parse_turf_map(small)
        if cells[r, c] == GRASS:
            assert O.exact_phi(mdp, 0, a) == pytest.approx(0.0, abs=1e-9)
        if cells[r, c] == _path_code():
            assert O.exact_phi(mdp, 0, a) == pytest.approx(1.0, abs=1e-9)


def _path_code():
    from revrl.envs.turf import PATH
    return PATH


def test_phi_variants_self_loop_and_trap():
    mdp = two_action_chain(2)
    pi = O.PolicyTable(np.array([[0.0, 1.0], [0.0, 1.0]]))  # always stay
    for gamma in (0.3, 0.9):
        disc, fixed = O.exact_phi_variants(mdp, pi, 0, 1, gamma=gamma, K=6)
        assert disc == pytest.approx(gamma, abs=1e-12)
        assert fixed == pytest.approx(1.0)
    # action 0 from state 0 leads toward the absorbing end under "always stay"
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    trap = TabularMDP(P=P, mu0=np.array([1.0, 0.0]))
    pit = O.uniform_policy(trap)
    disc, fixed = O.exact_phi_variants(trap, pit, 0, 0, gamma=0.9, K=8)
    assert disc == pytest.approx(0.0) and fixed == pytest.approx(0.0)


# --- empirical reversibility and the theory suite -------------------------------

def test_empirical_reversibility_single_state_bound_is_tight():
    mdp = single_state_mdp()
    pi = O.uniform_policy(mdp)
    psi_bar = O.empirical_reversibility(mdp, pi, 0, 0)
    phi_pi = O.exact_phi_pi(mdp, pi, 0, 0)
    assert psi_bar == pytest.approx(0.5)
    assert phi_pi == pytest.approx(1.0)
    assert psi_bar == pytest.approx(phi_pi / 2.0)


def test_empirical_reversibility_respects_halved_bound_on_cycle():
    mdp = three_cycle()
    pi = O.uniform_policy(mdp)
    psi_bar = O.empirical_reversibility(mdp, pi, 0, 0)
    phi_pi = O.exact_phi_pi(mdp, pi, 0, 0)
    assert psi_bar >= phi_pi / 2.0 - 1e-9


def test_verify_theory_on_random_instances():
    rng = RngState(12)
    for i in range(10):
        n_s = int(rng.fork(f"n{i}").gen.integers(2, 9))
        n_a = int(rng.fork(f"a{i}").gen.integers(2, 5))
        mdp = random_mdp(n_s, n_a, rng.fork(f"m{i}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"p{i}"))
        report = O.verify_theory(mdp, pi, tol=1e-9, label=f"i{i}")
        assert report.passed, report.summary()


def test_verify_theory_non_vacuous_sure_precedence():
    # one-way chains exercise the sure-precedence transitivity branch
    mdp = one_way_chain(5)
    pi = O.uniform_policy(mdp)
    report = O.verify_theory(mdp, pi, tol=1e-9, label="chain")
    assert report.passed, report.summary()


def test_verify_theory_flags_planted_violation():
    mdp = single_state_mdp()
    pi = O.uniform_policy(mdp)
    report = O.verify_theory(mdp, pi, tol=1e-9)
    # tamper with one check to confirm failures are reported
    report.add("halved_return_bound", "planted", 0.1, 0.5, False)
    assert not report.passed
    assert any(c.detail == "planted" for c in report.failures())
