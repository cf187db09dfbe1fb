"""
onriccati - Online Riccati update for linear-quadratic control

Solvers for Stein equations and the discrete algebraic Riccati equation,
strong-stability certificates, the online Riccati update with its reset step,
and a regret benchmark against fixed hindsight comparators.
"""

__version__ = "0.1.0"
