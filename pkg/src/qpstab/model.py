"""Quasipolynomial systems and their pointwise evaluations.

A quasipolynomial (QP) system in the interior of the positive orthant is

    dx_i/dt = x_i * (lambda_i + sum_j A_ij * phi_j(x)),   i = 1..n
    phi_j(x) = prod_k x_k ** B_jk,                        j = 1..m

with ``A`` of shape (n, m), ``B`` of shape (m, n), ``m >= n`` and
``rank(B) = n``. Lotka-Volterra systems are the case ``B = I``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ExtensionFailed, NonFiniteEntry, RankDeficientB

RANK_RTOL = 1e-10
EXTENSION_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class QPSystem:
    """Validated QP system. Build with :func:`validate_system`."""

    lam: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def __repr__(self):
        return f"QPSystem(n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class ExtendedExponentMatrix:
    Btilde: np.ndarray
    original_columns: int

    @property
    def appended(self) -> np.ndarray:
        return self.Btilde[:, self.original_columns:]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def validate_system(lam, A, B) -> QPSystem:
    """Check dimensions, finiteness and ``rank(B) = n``; return a QPSystem."""
    try:
        lam = np.asarray(lam, dtype=float)
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"entries must form numeric arrays: {exc}") from None
    if lam.ndim != 1:
        raise DimensionMismatch(f"lambda must be a vector, got shape {lam.shape}")
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionMismatch(
            f"A and B must be matrices, got shapes A{A.shape} and B{B.shape}"
        )
    n = lam.shape[0]
    if n == 0:
        raise DimensionMismatch("state dimension n must be positive")
    if A.shape[0] != n:
        raise DimensionMismatch(f"rows(A) = {A.shape[0]} but len(lambda) = {n}")
    m = A.shape[1]
    if B.shape[0] != m:
        raise DimensionMismatch(f"cols(A) = {m} but rows(B) = {B.shape[0]}")
    if B.shape[1] != n:
        raise DimensionMismatch(f"cols(B) = {B.shape[1]} but n = {n}")
    if m < n:
        raise DimensionMismatch(f"need m >= n, got m = {m} < n = {n}")
    for name, arr in (("lambda", lam), ("A", A), ("B", B)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntry(f"{name} contains non-finite entries")

    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientB(
            f"B is numerically rank deficient: smallest singular value {sv[-1]:.3e} "
            f"<= {RANK_RTOL:g} * largest ({sv[0]:.3e})",
            singular_values=sv,
        )
    return QPSystem(_frozen(lam), _frozen(A), _frozen(B))


def from_lotka_volterra(lam, A) -> QPSystem:
    """Embed the LV system dx_i/dt = x_i (lambda_i + (A x)_i) with B = I."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"Lotka-Volterra A must be square, got shape {A.shape}")
    return validate_system(lam, A, np.eye(A.shape[0]))


def check_state(sys: QPSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch(f"state must have shape ({sys.n},), got {x.shape}")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise ValueError("state must lie in the open positive orthant")
    return x


def quasimonomials(sys: QPSystem, x) -> np.ndarray:
    """phi(x), evaluated as exp(B ln x)."""
    x = check_state(sys, x)
    return np.exp(sys.B @ np.log(x))


def interaction_matrix(sys: QPSystem) -> np.ndarray:
    return sys.B @ sys.A


def vector_field(sys: QPSystem, x) -> np.ndarray:
    x = check_state(sys, x)
    phi = np.exp(sys.B @ np.log(x))
    return x * (sys.lam + sys.A @ phi)


def shifted_vector_field(sys: QPSystem, x, xstar, tol=None) -> np.ndarray:
    """The field written around an equilibrium: x_i * sum_j A_ij (phi_j(x) - phi_j(x*)).

    Raises NotAnEquilibrium when ``xstar`` fails the residual test. The
    difference of quasimonomials is formed as phi* * expm1(B (ln x - ln x*))
    so it stays accurate close to the equilibrium.
    """
    from .equilibrium import require_equilibrium

    x = check_state(sys, x)
    xstar = require_equilibrium(sys, xstar, tol)
    dphi = phi_difference(sys, x, xstar)
    return x * (sys.A @ dphi)


def phi_difference(sys: QPSystem, x, xstar) -> np.ndarray:
    d = sys.B @ (np.log(x) - np.log(xstar))
    return np.exp(sys.B @ np.log(xstar)) * np.expm1(d)


def quasimonomial_jacobian(sys: QPSystem, x) -> np.ndarray:
    """Matrix of d phi_i / d x_j = B_ij phi_i(x) / x_j, shape (m, n)."""
    x = check_state(sys, x)
    phi = np.exp(sys.B @ np.log(x))
    return sys.B * phi[:, None] / x[None, :]


def extend_exponent_matrix(sys: QPSystem, seed=0, max_random_tries=100) -> ExtendedExponentMatrix:
    """Complete B (m x n) to an invertible m x m matrix (B | B*).

    Standard basis columns are appended greedily, each kept only if it raises
    the numerical rank. Should that sweep miss the conditioning bound, seeded
    random unit columns are tried instead.
    """
    B = np.array(sys.B)
    m, n = B.shape
    if m == n:
        return ExtendedExponentMatrix(_frozen(B), n)

    def well_conditioned(M):
        sv = np.linalg.svd(M, compute_uv=False)
        return sv[-1] > EXTENSION_RTOL * sv[0]

    cols = B
    for k in range(m):
        if cols.shape[1] == m:
            break
        trial = np.column_stack([cols, np.eye(m)[:, k]])
        if well_conditioned(trial):
            cols = trial
    if cols.shape[1] == m and well_conditioned(cols):
        return ExtendedExponentMatrix(_frozen(cols), n)

    rng = np.random.default_rng(seed)
    for _ in range(max_random_tries):
        extra = rng.standard_normal((m, m - n))
        extra /= np.linalg.norm(extra, axis=0)
        trial = np.column_stack([B, extra])
        if well_conditioned(trial):
            return ExtendedExponentMatrix(_frozen(trial), n)
    raise ExtensionFailed(
        f"could not complete B ({m}x{n}) to an invertible matrix within "
        f"the conditioning bound {EXTENSION_RTOL:g}"
    )


def condition_diagnostics(sys: QPSystem) -> dict:
    """Singular-value diagnostics for B and Q = B A (reported, never enforced)."""
    sv_b = np.linalg.svd(sys.B, compute_uv=False)
    sv_q = np.linalg.svd(interaction_matrix(sys), compute_uv=False)
    return {
        "B_singular_values": sv_b.tolist(),
        "B_condition": float(sv_b[0] / sv_b[-1]),
        "Q_singular_values": sv_q.tolist(),
    }
