"""
Tests for the lyapunov module.
"""

import unittest

import numpy as np
from hypothesis import given, settings
import hypothesis.strategies as st

from onriccati.errors import DimensionError, UnstableClosedLoopError
from onriccati.lyapunov import solve_stein, solve_stein_transposed, stein_residual
from tests.helpers import random_spd, random_stable, seeded


class TestStein(unittest.TestCase):
    """Test cases for the Stein equation solvers."""

    def test_scalar(self):
        """p = f^2 p + v has p = v / (1 - f^2)."""
        P = solve_stein_transposed(np.array([[0.5]]), np.array([[3.0]]))
        self.assertAlmostEqual(P[0, 0], 4.0, places=12)

    def test_zero_closed_loop(self):
        """F = 0 gives P = V."""
        V = np.diag([1.0, 2.0])
        P = solve_stein_transposed(np.zeros((2, 2)), V)
        np.testing.assert_allclose(P, V, atol=1e-15)

    def test_orientation(self):
        """The covariance orientation is the transposed problem for F^T."""
        rng = seeded(11)
        F = random_stable(rng, 4, 0.8)
        V = random_spd(rng, 4)
        X = solve_stein(F, V)
        tol = 1e-10 * np.linalg.norm(X)
        np.testing.assert_allclose(X, F @ X @ F.T + V, atol=tol)
        np.testing.assert_allclose(X, solve_stein_transposed(F.T, V), atol=tol)

    def test_unstable_raises(self):
        """A closed loop on the unit circle is rejected with its radius."""
        with self.assertRaises(UnstableClosedLoopError) as ctx:
            solve_stein_transposed(np.array([[1.0]]), np.array([[1.0]]))
        self.assertAlmostEqual(ctx.exception.radius, 1.0)

    def test_dimension_mismatch(self):
        """V must match F."""
        with self.assertRaises(DimensionError):
            solve_stein_transposed(np.zeros((2, 2)), np.eye(3))

    def test_unknown_backend(self):
        """Unknown backends are rejected."""
        with self.assertRaises(ValueError):
            solve_stein_transposed(np.zeros((2, 2)), np.eye(2), backend="schur")

    def test_result_symmetric(self):
        """Solutions are exactly symmetric."""
        rng = seeded(5)
        F, V = random_stable(rng, 6), random_spd(rng, 6)
        P = solve_stein_transposed(F, V, backend="doubling")
        np.testing.assert_array_equal(P, P.T)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(min_value=0, max_value=2 ** 32 - 1),
        st.integers(min_value=1, max_value=12),
        st.floats(min_value=0.0, max_value=0.95),
    )
    def test_residual_and_backends_agree(self, seed, n, radius):
        """Both backends solve the equation and agree with each other."""
        rng = seeded(seed)
        F = random_stable(rng, n, radius)
        V = random_spd(rng, n)
        direct = solve_stein_transposed(F, V, backend="direct")
        doubling = solve_stein_transposed(F, V, backend="doubling")
        scale = max(1.0, np.linalg.norm(V, 2))
        for P in (direct, doubling):
            limit = 1e-10 * scale * max(1.0, np.linalg.norm(P, 2))
            self.assertLessEqual(stein_residual(F, V, P), limit)
        atol = 1e-8 * np.linalg.norm(direct, 2)
        np.testing.assert_allclose(direct, doubling, rtol=1e-8, atol=atol)


if __name__ == "__main__":
    unittest.main()
