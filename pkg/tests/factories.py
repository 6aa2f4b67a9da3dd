"""Planted test instances: the right answer is known by construction."""

import numpy as np

from qpstab.model import validate_system


def random_exponents(rng, m, n, bound=2.0):
    while True:
        B = rng.uniform(-bound, bound, (m, n))
        sv = np.linalg.svd(B, compute_uv=False)
        if sv[-1] > 1e-3 * sv[0]:
            return B


def planted_equilibrium_system(rng, n, m, bound=2.0, spread=0.5):
    """Random QP system whose lambda is chosen so that x* is a fixed point."""
    B = random_exponents(rng, m, n, bound)
    A = rng.standard_normal((n, m))
    xstar = np.exp(rng.uniform(-spread, spread, n))
    lam = -A @ np.exp(B @ np.log(xstar))
    return validate_system(lam, A, B), xstar


def planted_certificate(rng, m):
    """Q = C0^-1 R with R + R^T negative definite, so C0 certifies Q."""
    c0 = np.exp(rng.uniform(-1.5, 1.5, m))
    K = rng.standard_normal((m, m))
    G = rng.standard_normal((m, m))
    R = (K - K.T) - (G @ G.T / m + 0.1 * np.eye(m))
    return R / c0[:, None], c0, R


def positive_diagonal_Q(rng, m):
    Q = rng.standard_normal((m, m))
    k = rng.integers(m)
    Q[k, k] = abs(Q[k, k]) + rng.uniform(1e-6, 1.0)
    return Q


def definite_system(rng, n, bound=1.0):
    """Square (m = n) QP system with a planted definite certificate and equilibrium."""
    B = random_exponents(rng, n, n, bound)
    Q, c0, _ = planted_certificate(rng, n)
    A = np.linalg.solve(B, Q)
    xstar = np.exp(rng.uniform(-0.5, 0.5, n))
    lam = -A @ np.exp(B @ np.log(xstar))
    return validate_system(lam, A, B), xstar, c0


PREDATOR_PREY = dict(lam=[1.0, -1.0], A=[[0.0, -1.0], [1.0, 0.0]])

# n = 2, m = 3, phi = (x1, x2, x1 x2); Q = B A is skew-symmetric, x* = (1, 1)
SKEW_QP = dict(
    lam=[2.0, -2.0],
    A=[[0.0, -1.0, -1.0], [1.0, 0.0, 1.0]],
    B=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
)


def skew_qp_system():
    return validate_system(SKEW_QP["lam"], SKEW_QP["A"], SKEW_QP["B"])


def unique_equilibrium_system(rng, n, m, bound=2.0, spread=0.5):
    """QP system whose planted x* is its only interior equilibrium.

    With A = K B^T C0 and K + K^T negative definite, the log-coordinate field
    is du/dt = K grad_u W(u), where W is strictly convex in u = ln x (B has
    full column rank). K is invertible, so du/dt = 0 forces grad W = 0, which
    happens only at u* = ln x*.
    """
    B = random_exponents(rng, m, n, bound)
    c0 = np.exp(rng.uniform(-1.0, 1.0, m))
    J = rng.standard_normal((n, n))
    G = rng.standard_normal((n, n))
    K = (J - J.T) - (G @ G.T / n + 0.5 * np.eye(n))
    A = K @ B.T * c0[None, :]
    xstar = np.exp(rng.uniform(-spread, spread, n))
    lam = -A @ np.exp(B @ np.log(xstar))
    return validate_system(lam, A, B), xstar, c0
