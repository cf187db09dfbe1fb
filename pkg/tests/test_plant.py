"""
Tests for the plant module.
"""

import unittest

import numpy as np

from onriccati.errors import DimensionError, NotPSDError
from onriccati.matcore import trace_dot
from onriccati.plant import (
    CostPair,
    SystemModel,
    covariance_trajectory,
    expected_stage_cost,
    expected_total_cost,
    finite_horizon_cost,
    fixed_policy_total_cost,
    propagate_cov,
    rollout,
    rollout_step,
    sample_initial_states,
    steady_covariance,
)
from onriccati.riccati import DareProblem, backward_riccati, find_stabilizing_gain
from tests.helpers import random_spd, scalar_instance, seeded


def scalar_system():
    A, B, _, _ = scalar_instance()
    return SystemModel(A, B)


def random_costs(rng, n, m, T):
    return [
        CostPair(random_spd(rng, n, 0.5), random_spd(rng, m, 0.5)) for _ in range(T)
    ]


class TestSystemModel(unittest.TestCase):
    """Test cases for the plant description."""

    def test_defaults(self):
        """W defaults to the identity."""
        sys = SystemModel(np.eye(3), np.ones((3, 2)))
        self.assertEqual((sys.n, sys.m), (3, 2))
        self.assertAlmostEqual(sys.omega, 3.0)
        np.testing.assert_array_equal(sys.W_sqrt, np.eye(3))

    def test_shape_errors(self):
        """B rows and W shape must match A."""
        with self.assertRaises(DimensionError):
            SystemModel(np.eye(2), np.ones((3, 1)))
        with self.assertRaises(DimensionError):
            SystemModel(np.eye(2), np.ones((2, 1)), W=np.eye(3))


class TestCovariance(unittest.TestCase):
    """Test cases for exact covariance propagation."""

    def test_scalar_propagation(self):
        """Closed loop 0.5: X goes 0, 1, 1.25 and settles at 4/3."""
        sys = scalar_system()
        K = np.array([[1.5]])
        covs = covariance_trajectory([K, K], sys)
        self.assertEqual([c[0, 0] for c in covs], [0.0, 1.0, 1.25])
        self.assertAlmostEqual(steady_covariance(K, sys)[0, 0], 4.0 / 3.0, places=12)

    def test_rejects_indefinite(self):
        """Covariances must be PSD."""
        with self.assertRaises(NotPSDError):
            propagate_cov(-np.eye(1), np.array([[1.5]]), scalar_system())

    def test_stage_cost(self):
        """(Q + K^T R K) . X at X = 1 is 1 + 2.25."""
        cost = expected_stage_cost(np.eye(1), np.eye(1), np.eye(1), np.array([[1.5]]))
        self.assertAlmostEqual(cost, 3.25)

    def test_total_cost_length_mismatch(self):
        """One gain per round."""
        with self.assertRaises(DimensionError):
            expected_total_cost([np.eye(1)], [], scalar_system())


class TestRollout(unittest.TestCase):
    """Test cases for stochastic rollouts."""

    def test_shapes(self):
        """A batch of states advances as a batch."""
        rng = seeded(3)
        sys = SystemModel(np.eye(2) * 0.5, np.ones((2, 1)))
        x = sample_initial_states(5, sys, rng, X1=np.eye(2))
        self.assertEqual(rollout_step(x, np.zeros((1, 2)), sys, rng).shape, (5, 2))
        states = rollout(np.zeros(2), [np.zeros((1, 2))] * 4, sys, rng)
        self.assertEqual(states.shape, (5, 2))

    def test_rejects_wrong_dimension(self):
        """The state must have n entries."""
        with self.assertRaises(DimensionError):
            rollout_step(np.zeros(3), np.array([[1.5]]), scalar_system(), seeded(0))

    def test_monte_carlo_matches_covariance(self):
        """The empirical covariance after 30 steps agrees with the exact one."""
        rng = seeded(2024)
        sys = scalar_system()
        K = np.array([[1.5]])
        states = rollout(np.zeros((40000, 1)), [K] * 30, sys, rng)
        empirical = float(np.mean(states[-1, :, 0] ** 2))
        exact = covariance_trajectory([K] * 30, sys)[-1][0, 0]
        self.assertAlmostEqual(empirical, exact, delta=0.05 * exact)


class TestTotalCosts(unittest.TestCase):
    """Test cases for total expected costs."""

    def setUp(self):
        rng = seeded(17)
        self.n, self.m = 3, 2
        A = rng.uniform(-1.5, 1.5, size=(self.n, self.n))
        B = rng.uniform(-1.0, 1.0, size=(self.n, self.m))
        self.sys = SystemModel(A, B)
        self.costs = random_costs(rng, self.n, self.m, 60)
        prob = DareProblem(A, B, np.eye(self.n), np.eye(self.m))
        policy, _ = find_stabilizing_gain(prob)
        self.K = policy.K

    def test_fixed_policy_matches_propagation(self):
        """The steady-state shortcut agrees with round-by-round propagation."""
        for X1 in (None, 2.0 * np.eye(self.n)):
            direct, stage = expected_total_cost([self.K] * 60, self.costs, self.sys, X1)
            shortcut = fixed_policy_total_cost(self.K, self.costs, self.sys, X1)
            self.assertAlmostEqual(shortcut, direct, delta=1e-9 * direct)
            self.assertEqual(stage.shape, (60,))

    def test_finite_horizon_value(self):
        """The backward recursion attains tr(P_1 X_1) + sum tr(P_{t+1} W)."""
        Qs = [c.Q for c in self.costs[:20]]
        Rs = [c.R for c in self.costs[:20]]
        gains, values = backward_riccati(self.sys.A, self.sys.B, Qs, Rs)
        X1 = np.eye(self.n)
        cost = finite_horizon_cost(gains, self.costs[:20], self.sys, X1)
        noise = sum(trace_dot(P, self.sys.W) for P in values[1:])
        expected = trace_dot(values[0], X1) + noise
        self.assertAlmostEqual(cost, expected, delta=1e-9 * expected)

    def test_finite_horizon_optimal(self):
        """Perturbing any finite-horizon gain raises the cost."""
        Qs = [c.Q for c in self.costs[:10]]
        Rs = [c.R for c in self.costs[:10]]
        gains, _ = backward_riccati(self.sys.A, self.sys.B, Qs, Rs)
        X1 = np.eye(self.n)
        best = finite_horizon_cost(gains, self.costs[:10], self.sys, X1)
        rng = seeded(5)
        for t in range(len(gains)):
            perturbed = list(gains)
            perturbed[t] = gains[t] + 0.05 * rng.standard_normal(gains[t].shape)
            cost = finite_horizon_cost(perturbed, self.costs[:10], self.sys, X1)
            self.assertGreater(cost, best)


if __name__ == "__main__":
    unittest.main()
