"""Tabular oracle tests: exact Bellman operators, contraction, discretization."""

import numpy as np
import pytest

from gmmq import envs
from gmmq.cli import three_state_mdp
from gmmq.envs import pendulum_spec
from gmmq.tabular import (
    FiniteMdp,
    bellman_apply,
    compare_policies,
    contraction_check,
    discretize,
    empirical_br_loss,
    ensemble_br_loss,
    fixed_point,
    greedy_policy_of,
)


def random_mdp(rng, n_states=None, n_actions=None, discount=None):
    n_states = n_states or int(rng.integers(2, 7))
    n_actions = n_actions or int(rng.integers(2, 5))
    raw = rng.random((n_states, n_actions, n_states)) + 1e-3
    return FiniteMdp(
        raw / raw.sum(axis=2, keepdims=True),
        rng.normal(size=(n_states, n_actions)),
        discount if discount is not None else float(rng.uniform(0.05, 0.95)),
    )


def two_state_chain(discount=0.5):
    # state 0 hops to state 1 deterministically; state 1 is absorbing
    transitions = np.zeros((2, 1, 2))
    transitions[0, 0, 1] = 1.0
    transitions[1, 0, 1] = 1.0
    losses = np.array([[1.0], [2.0]])
    return FiniteMdp(transitions, losses, discount)


class TestBellmanApply:
    def test_zero_discount_returns_losses(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng, discount=0.0)
        q = rng.normal(size=(mdp.n_states, mdp.n_actions))
        np.testing.assert_array_equal(bellman_apply(mdp, q), mdp.losses)

    def test_deterministic_chain_hand_value(self):
        mdp = two_state_chain(0.5)
        q = np.array([[3.0], [4.0]])
        # state 0: 1 + 0.5*4 = 3 ; state 1: 2 + 0.5*4 = 4
        np.testing.assert_allclose(bellman_apply(mdp, q), [[3.0], [4.0]])

    def test_fixed_point_unchanged(self):
        rng = np.random.default_rng(1)
        mdp = random_mdp(rng)
        qstar = fixed_point(mdp)
        np.testing.assert_allclose(bellman_apply(mdp, qstar), qstar, atol=1e-11)
        policy = rng.integers(mdp.n_actions, size=mdp.n_states)
        qpol = fixed_point(mdp, policy)
        np.testing.assert_allclose(bellman_apply(mdp, qpol, policy), qpol, atol=1e-11)

    def test_shape_mismatch_rejected(self):
        mdp = two_state_chain()
        with pytest.raises(ValueError):
            bellman_apply(mdp, np.zeros((3, 1)))


class TestFixedPoint:
    def test_zero_discount_is_loss_table(self):
        rng = np.random.default_rng(2)
        mdp = random_mdp(rng, discount=0.0)
        np.testing.assert_array_equal(fixed_point(mdp), mdp.losses)

    def test_absorbing_chain_geometric_series(self):
        mdp = two_state_chain(0.5)
        qstar = fixed_point(mdp)
        # absorbing state: q = 2 / (1 - 0.5) = 4; predecessor: 1 + 0.5*4 = 3
        np.testing.assert_allclose(qstar, [[3.0], [4.0]], atol=1e-11)

    def test_convergence_within_contraction_bound(self):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng, discount=0.7)
        # sup-norm error shrinks by discount each sweep, so iterations needed
        # scale like log(tol)/log(discount)
        q = np.zeros((mdp.n_states, mdp.n_actions))
        qstar = fixed_point(mdp)
        budget = int(np.ceil(np.log(1e-12) / np.log(0.7))) + 60
        for _ in range(budget):
            q = bellman_apply(mdp, q)
        assert np.max(np.abs(q - qstar)) < 1e-11


class TestContraction:
    def test_equal_inputs_guarded(self):
        mdp = two_state_chain()
        q = np.ones((2, 1))
        assert contraction_check(mdp, q, q) == 0.0

    def test_ratio_below_discount_on_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            mdp = random_mdp(rng)
            q1 = rng.normal(size=(mdp.n_states, mdp.n_actions))
            q2 = rng.normal(size=(mdp.n_states, mdp.n_actions))
            policy = rng.integers(mdp.n_actions, size=mdp.n_states)
            assert contraction_check(mdp, q1, q2) <= mdp.discount + 1e-12
            assert contraction_check(mdp, q1, q2, policy) <= mdp.discount + 1e-12

    def test_constant_offset_achieves_equality(self):
        mdp = two_state_chain(0.5)
        q1 = np.array([[1.0], [2.0]])
        q2 = q1 + 3.0
        assert contraction_check(mdp, q1, q2) == pytest.approx(0.5, rel=1e-12)
        assert contraction_check(mdp, q1, q2, np.zeros(2, dtype=int)) == pytest.approx(0.5, rel=1e-12)


class TestGeometricDecay:
    def test_banach_picard_error_bound(self):
        rng = np.random.default_rng(5)
        for policy_mode in (False, True):
            mdp = random_mdp(rng, discount=0.8)
            policy = rng.integers(mdp.n_actions, size=mdp.n_states) if policy_mode else None
            qstar = fixed_point(mdp, policy)
            q = rng.normal(size=qstar.shape)
            initial = np.max(np.abs(q - qstar))
            for i in range(1, 21):
                q = bellman_apply(mdp, q, policy)
                if i in (5, 10, 20):
                    assert np.max(np.abs(q - qstar)) <= mdp.discount**i * initial + 1e-9


class TestSamplingConvergence:
    def test_empirical_loss_error_shrinks(self):
        mdp = three_state_mdp()
        q = np.array([[0.5, 2.0], [1.5, 0.3], [0.2, 1.1]])
        policy = np.array([0, 1, 0])
        dist = np.array([0.5, 0.3, 0.2])
        exact = ensemble_br_loss(mdp, q, policy, dist)
        errors = [
            abs(empirical_br_loss(mdp, q, policy, dist, n, np.random.default_rng(42 + n)) - exact)
            for n in (10**3, 10**4, 10**5)
        ]
        assert errors[0] > errors[1] > errors[2]

    def test_ensemble_matches_brute_force_enumeration(self):
        mdp = three_state_mdp()
        q = np.array([[0.5, 2.0], [1.5, 0.3], [0.2, 1.1]])
        policy = np.array([0, 1, 0])
        dist = np.array([0.5, 0.3, 0.2])
        brute = 0.0
        for s in range(3):
            a = policy[s]
            for s2 in range(3):
                residual = mdp.losses[s, a] + mdp.discount * q[s2, policy[s2]] - q[s, a]
                brute += dist[s] * mdp.transitions[s, a, s2] * residual**2
        np.testing.assert_allclose(ensemble_br_loss(mdp, q, policy, dist), brute, rtol=1e-12)


class TestDiscretize:
    def test_rows_are_one_hot_for_deterministic_env(self):
        mdp = discretize(pendulum_spec(), 5, discount=0.9, absorbing_goals=False)
        assert mdp.n_states == 25
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                row = mdp.transitions[s, a]
                assert row.max() == 1.0 and row.sum() == 1.0

    def test_goal_cells_absorbing_when_configured(self):
        spec = pendulum_spec()
        mdp = discretize(spec, 11, discount=0.9, absorbing_goals=True)
        for s in range(mdp.n_states):
            if envs.is_goal(spec, mdp.centers[s]):
                for a in range(mdp.n_actions):
                    assert mdp.transitions[s, a, s] == 1.0
                    assert mdp.losses[s, a] == 0.0

    def test_pendulum_grid_builds_quickly(self):
        import time

        started = time.perf_counter()
        mdp = discretize(pendulum_spec(), 11, discount=0.9)
        assert time.perf_counter() - started < 1.0
        assert mdp.n_states == 121
        assert mdp.centers.shape == (121, 2)


class TestComparePolicies:
    def test_tabular_greedy_agrees_with_itself(self):
        mdp = discretize(pendulum_spec(), 7, discount=0.9)
        qstar = fixed_point(mdp)
        centers = {tuple(c): i for i, c in enumerate(mdp.centers)}
        q_fn = lambda s, a: qstar[centers[tuple(s)], a]
        agreement, gap = compare_policies(mdp, qstar, q_fn)
        assert agreement == 1.0
        assert gap == 0.0

    def test_uniform_q_matches_on_tie_break(self):
        # a constant learned Q always picks action 0; agreement equals the
        # fraction of grid states whose tabular greedy action is 0
        mdp = discretize(pendulum_spec(), 7, discount=0.9)
        qstar = fixed_point(mdp)
        expected = float(np.mean(greedy_policy_of(qstar) == 0))
        agreement, _ = compare_policies(mdp, qstar, lambda s, a: 0.0)
        assert agreement == pytest.approx(expected)

    def test_requires_grid_centers(self):
        mdp = two_state_chain()
        with pytest.raises(ValueError):
            compare_policies(mdp, np.zeros((2, 1)), lambda s, a: 0.0)


class TestFiniteMdpValidation:
    def test_rejects_non_stochastic_rows(self):
        bad = np.zeros((2, 1, 2))
        bad[:, :, 0] = 0.9
        with pytest.raises(ValueError):
            FiniteMdp(bad, np.zeros((2, 1)), 0.5)

    def test_rejects_bad_discount(self):
        good = np.zeros((2, 1, 2))
        good[:, :, 0] = 1.0
        with pytest.raises(ValueError):
            FiniteMdp(good, np.zeros((2, 1)), 1.0)
