"""The generalized Liapunov function W of a QP system and its time derivative.

For a positive diagonal scaling c and interior equilibrium x*,

    W(x) = sum_i c_i [phi_i(x) - phi_i(x*) - phi_i(x*) ln(phi_i(x) / phi_i(x*))]

and along trajectories

    dW/dt = 1/2 (phi(x) - phi(x*))^T (C Q + Q^T C) (phi(x) - phi(x*)).

W is evaluated as sum_i c_i phi_i(x*) g(d_i) with g(d) = e^d - 1 - d and
d = B (ln x - ln x*), which is free of cancellation near x*.
"""

import math
from dataclasses import dataclass

import numpy as np

from .certificate import DiagonalScaling, symmetrized_form
from .equilibrium import require_equilibrium
from .model import QPSystem, check_state, extend_exponent_matrix, interaction_matrix

# below this |d| the Taylor series of e^d - 1 - d is used; expm1(d) - d loses
# about 2 eps / |d| of relative accuracy to cancellation, so the cutoff is wide
# and the series long enough (through d^17 / 17!) to stay at full precision
SERIES_CUTOFF = 0.5
_G_COEFFS = tuple(1.0 / math.factorial(k) for k in range(2, 18))


def exp_remainder(d):
    """g(d) = e^d - 1 - d, accurate to a few ulps for all d."""
    d = np.asarray(d, dtype=float)
    out = np.expm1(d) - d
    small = np.abs(d) < SERIES_CUTOFF
    if np.any(small):
        ds = d[small]
        acc = np.zeros_like(ds)
        for coef in reversed(_G_COEFFS):
            acc = acc * ds + coef
        out[small] = acc * ds * ds
    return out


@dataclass(frozen=True)
class LiapunovEvaluation:
    W: float
    Wdot: float
    gradW: np.ndarray


def _weights(c):
    return c.c if isinstance(c, DiagonalScaling) else np.asarray(c, dtype=float)


def log_ratio(x, xstar):
    """ln(x / x*) to full relative accuracy, also when x is close to x*.

    ln x - ln x* loses about eps |ln x| absolutely, which W (quadratic in the
    displacement near x*) turns into a relative error of order eps / |d|.
    Within a factor of about two, x - x* is exact and log1p recovers the
    ratio; further out the plain difference of logarithms is better
    conditioned.
    """
    x = np.asarray(x, dtype=float)
    xstar = np.asarray(xstar, dtype=float)
    delta = (x - xstar) / xstar
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.log1p(delta)
    return np.where(np.abs(delta) < 0.5, near, np.log(x) - np.log(xstar))


def _log_displacement(sys, xstar, x):
    phistar = np.exp(sys.B @ np.log(xstar))
    d = sys.B @ log_ratio(x, xstar)
    return phistar, d


def evaluate_W(sys: QPSystem, c, xstar, x) -> float:
    x = check_state(sys, x)
    xstar = check_state(sys, xstar)
    phistar, d = _log_displacement(sys, xstar, x)
    return float(np.dot(_weights(c), phistar * exp_remainder(d)))


def evaluate_W_batch(sys: QPSystem, c, xstar, X) -> np.ndarray:
    """W at every row of X (shape (k, n))."""
    X = np.asarray(X, dtype=float)
    xstar = check_state(sys, xstar)
    phistar = np.exp(sys.B @ np.log(xstar))
    D = log_ratio(X, xstar) @ sys.B.T
    return exp_remainder(D) @ (_weights(c) * phistar)


def _dphi(sys, xstar, x):
    phistar, d = _log_displacement(sys, xstar, x)
    return phistar * np.expm1(d)


def evaluate_Wdot(sys: QPSystem, c, xstar, x, tol=None) -> float:
    """dW/dt from the quadratic form in phi(x) - phi(x*). Requires x* to be a fixed point."""
    x = check_state(sys, x)
    xstar = require_equilibrium(sys, xstar, tol)
    M = symmetrized_form(interaction_matrix(sys), _weights(c))
    dphi = _dphi(sys, xstar, x)
    return float(0.5 * dphi @ M @ dphi)


def evaluate_Wdot_batch(sys: QPSystem, c, xstar, X, tol=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    xstar = require_equilibrium(sys, xstar, tol)
    M = symmetrized_form(interaction_matrix(sys), _weights(c))
    phistar = np.exp(sys.B @ np.log(xstar))
    dphi = phistar * np.expm1(log_ratio(X, xstar) @ sys.B.T)
    return 0.5 * np.einsum("ki,ij,kj->k", dphi, M, dphi)


def gradient_W(sys: QPSystem, c, xstar, x) -> np.ndarray:
    """dW/dx_j = sum_i c_i B_ij (phi_i(x) - phi_i(x*)) / x_j."""
    x = check_state(sys, x)
    xstar = check_state(sys, xstar)
    dphi = _dphi(sys, xstar, x)
    return (sys.B.T @ (_weights(c) * dphi)) / x


def chain_rule_Wdot(sys: QPSystem, c, xstar, x, tol=None) -> float:
    """dW/dt as grad W . f(x), with f in its shifted form around x*.

    Independent of :func:`evaluate_Wdot`: it never forms C Q + Q^T C, so the
    agreement of the two is the executable version of the derivative identity.
    """
    from .model import shifted_vector_field

    x = check_state(sys, x)
    xstar = require_equilibrium(sys, xstar, tol)
    return float(gradient_W(sys, c, xstar, x) @ shifted_vector_field(sys, x, xstar, tol))


def evaluate(sys: QPSystem, c, xstar, x, tol=None) -> LiapunovEvaluation:
    return LiapunovEvaluation(
        evaluate_W(sys, c, xstar, x),
        evaluate_Wdot(sys, c, xstar, x, tol),
        gradient_W(sys, c, xstar, x),
    )


def _entropy_term(s, log_r):
    """r - 1 - ln r for r = 1 + s, given both s and ln r accurately.

    Near r = 1 this uses t = s / (2 + s) = (r - 1) / (r + 1), for which
    r - 1 - ln r = 2 t^2 (1 / (1 - t) - t / 3 - t^3 / 5 - ...), a form
    without cancellation that shares nothing with exp_remainder.
    """
    out = s - log_r
    small = np.abs(s) < SERIES_CUTOFF
    if np.any(small):
        t = s[small] / (2.0 + s[small])
        t2 = t * t
        acc = np.zeros_like(t)
        for k in range(41, 1, -2):
            acc = acc * t2 + 1.0 / k
        out[small] = 2.0 * t2 * (1.0 / (1.0 - t) - t * acc)
    return out


def positivity_oracle(sys: QPSystem, c, xstar, x, extension=None):
    """W computed along the lifting argument instead of directly.

    B is completed to an invertible (B | B*), the state is embedded as
    z = (x, 1, ..., 1) and z* = (x*, 1, ..., 1), y = prod_j z_j^Btilde_ij,
    and the m-dimensional function
    V(y) = sum_i c_i (y_i - y*_i - y*_i ln(y_i / y*_i)) is evaluated at y(z).
    Its value must coincide with evaluate_W.

    Each term is written as y*_i (r_i - 1 - ln r_i) with
    r_i = y_i / y*_i = prod_j (z_j / z*_j)^Btilde_ij, whose logarithm is
    accumulated from the coordinate ratios so that W keeps full relative
    accuracy near x*.

    ``x`` may also be a (k, n) batch, giving a length-k array.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != sys.n or not np.all(X > 0):
        raise ValueError("states must be strictly positive with n components")
    xstar = check_state(sys, xstar)
    ext = extension or extend_exponent_matrix(sys)
    Bt = ext.Btilde
    pad = np.ones((X.shape[0], sys.m - sys.n))
    Z = np.hstack([X, pad])
    zstar = np.concatenate([xstar, pad[0]])
    ystar = np.prod(zstar[None, :] ** Bt, axis=1)
    log_r = log_ratio(Z, zstar[None, :]) @ Bt.T
    s = np.expm1(log_r)
    vals = (ystar[None, :] * _entropy_term(s, log_r)) @ _weights(c)
    return float(vals[0]) if single else vals
