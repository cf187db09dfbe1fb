"""
Shared random instances for the tests.
"""

import numpy as np

from onriccati.utils import make_rng


def random_spd(rng, n, floor=0.1):
    G = rng.standard_normal((n, n))
    return G @ G.T + floor * np.eye(n)


def random_stable(rng, n, radius=0.9):
    F = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(F)))
    return F * (radius / rho) if rho > 0 else F


def scalar_instance():
    """A = 2, B = 1, Q = R = 1: P* = 2 + sqrt(5), K* = (1 + sqrt(5)) / 2."""
    return np.array([[2.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]])


def seeded(seed):
    return make_rng(seed)
