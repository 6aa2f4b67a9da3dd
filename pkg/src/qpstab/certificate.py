"""Diagonal Lyapunov scalings of the interaction matrix Q = B A.

We look for c > 0 such that M(c) = C Q + Q^T C (C = diag(c)) is negative
definite or negative semidefinite. The search minimizes the largest
eigenvalue of M over the simplex {c > 0, sum(c) = m}, parametrized as
c = m * softmax(theta), with seeded multistart Nelder-Mead.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.special import softmax

from .errors import DimensionMismatch, EigenFailure, VerificationMismatch


class Classification(str, Enum):
    NEGATIVE_DEFINITE = "NegativeDefinite"
    NEGATIVE_SEMIDEFINITE = "NegativeSemiDefinite"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class CertificateConfig:
    seed: int = 0
    max_starts: int = 20
    definite_tol: float = 1e-8
    semidefinite_tol: float = 1e-7
    start_scale: float = 1.0
    maxfev_per_dim: int = 400
    # a "semidefinite" C whose entries span more than this ratio is numerically
    # singular rather than positive definite, see classify_scaling
    min_scaling_ratio: float = 1e-6
    # remaining starts can only widen the margin of a definite certificate
    stop_when_definite: bool = True


@dataclass(frozen=True, eq=False)
class DiagonalScaling:
    """Positive diagonal weights normalized to sum to m."""

    c: np.ndarray

    @classmethod
    def from_weights(cls, weights) -> "DiagonalScaling":
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("scaling weights must be a non-empty vector")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("scaling weights must be finite and strictly positive")
        c = w * (w.size / w.sum())
        c.setflags(write=False)
        return cls(c)

    @property
    def m(self) -> int:
        return self.c.size

    @property
    def ratio(self) -> float:
        return float(self.c.min() / self.c.max())


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    scaling: DiagonalScaling
    classification: Classification
    lambda_max: float
    margin: float
    note: str = ""
    starts: int = 0
    evaluations: int = 0
    objective_trace: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return self.classification is not Classification.INCONCLUSIVE


@dataclass(frozen=True)
class VerificationReport:
    classification: Classification
    lambda_max: float
    eigenvalues: np.ndarray
    positive: bool
    normalized: bool


def symmetrized_form(Q, scaling) -> np.ndarray:
    """M = C Q + Q^T C, symmetrized after forming."""
    Q = np.asarray(Q, dtype=float)
    c = scaling.c if isinstance(scaling, DiagonalScaling) else np.asarray(scaling, dtype=float)
    if Q.ndim != 2 or Q.shape != (c.size, c.size):
        raise DimensionMismatch(f"Q of shape {Q.shape} does not match scaling of length {c.size}")
    CQ = c[:, None] * Q
    M = CQ + CQ.T
    return 0.5 * (M + M.T)


def thresholds(M, config=None):
    cfg = config or CertificateConfig()
    scale = max(1.0, float(np.linalg.norm(M, "fro")))
    return cfg.definite_tol * scale, cfg.semidefinite_tol * scale


def _eigvalsh(M):
    try:
        return np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"symmetric eigendecomposition failed: {exc}") from None


def classify(M, config=None):
    """Return (classification, lambda_max, eigenvalues) for symmetric M."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise EigenFailure("matrix has non-finite entries")
    ev = _eigvalsh(M)
    lmax = float(ev[-1])
    tau_def, tau_semi = thresholds(M, config)
    if lmax < -tau_def:
        cls = Classification.NEGATIVE_DEFINITE
    elif lmax <= tau_semi:
        cls = Classification.NEGATIVE_SEMIDEFINITE
    else:
        cls = Classification.INCONCLUSIVE
    return cls, lmax, ev


def _zero_diagonal_defect(Q, M):
    """Largest off-diagonal |M_ij| in a row whose diagonal Q_ii is exactly zero.

    M_ii = 2 c_i Q_ii vanishes there for every c, and a negative semidefinite
    matrix with a zero diagonal entry must have that whole row zero.
    """
    rows = np.flatnonzero(np.diag(Q) == 0)
    if rows.size == 0:
        return 0.0
    return float(np.max(np.abs(M[rows])))


def classify_scaling(Q, scaling, config=None):
    """Classify M(c) and apply the scaling-level sanity rules.

    ``scaling`` is a DiagonalScaling or a plain positive weight vector (used
    as given, without normalization).

    The semidefinite band can be entered without any true certificate by
    driving some c_i towards zero. A semidefinite verdict is therefore
    downgraded when C is numerically degenerate (min/max c below
    ``min_scaling_ratio``) or when a row of M with a structurally zero
    diagonal is not zero within the semidefinite tolerance.
    """
    cfg = config or CertificateConfig()
    weights = scaling.c if isinstance(scaling, DiagonalScaling) else np.asarray(scaling, dtype=float)
    M = symmetrized_form(Q, weights)
    cls, lmax, ev = classify(M, cfg)
    ratio = float(weights.min() / weights.max())
    note = ""
    if cls is Classification.NEGATIVE_SEMIDEFINITE:
        _, tau_semi = thresholds(M, cfg)
        defect = _zero_diagonal_defect(np.asarray(Q, dtype=float), M)
        if ratio < cfg.min_scaling_ratio:
            cls = Classification.INCONCLUSIVE
            note = (f"semidefinite only with degenerate scaling "
                    f"(min/max c = {ratio:.1e})")
        elif defect > tau_semi:
            cls = Classification.INCONCLUSIVE
            note = (f"row of C Q + Q^T C with zero diagonal is not zero "
                    f"(|M_ij| up to {defect:.1e})")
    fro = float(np.linalg.norm(M, "fro"))
    margin = lmax / fro if fro > 0 else 0.0
    return cls, lmax, margin, ev, note


def _theta_to_c(theta):
    return theta.size * softmax(theta)


def search_certificate(Q, config=None) -> StabilityCertificate:
    """Seeded multistart minimization of lambda_max(C Q + Q^T C).

    A positive diagonal entry of Q makes M_ii = 2 c_i Q_ii > 0 for every
    positive c, so no certificate can exist; that case returns Inconclusive
    without searching.
    """
    cfg = config or CertificateConfig()
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"Q must be square, got shape {Q.shape}")
    m = Q.shape[0]

    positive_diag = np.flatnonzero(np.diag(Q) > 0)
    if positive_diag.size:
        scaling = DiagonalScaling.from_weights(np.ones(m))
        _, lmax, margin, _, _ = classify_scaling(Q, scaling, cfg)
        idx = ", ".join(str(int(i) + 1) for i in positive_diag)
        return StabilityCertificate(
            scaling, Classification.INCONCLUSIVE, lmax, margin,
            note=f"necessary condition fails: Q_ii > 0 for i = {idx}",
        )

    def objective(theta):
        M = symmetrized_form(Q, _theta_to_c(theta))
        return float(_eigvalsh(M)[-1])

    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(m)] + [rng.uniform(-cfg.start_scale, cfg.start_scale, m)
                              for _ in range(max(cfg.max_starts - 1, 0))]
    best_theta, best_f, nfev = None, np.inf, 0
    trace = []
    for theta0 in starts:
        if m == 1:
            # simplex is a single point
            theta, f = theta0, objective(theta0)
            nfev += 1
        else:
            res = minimize(
                objective, theta0, method="Nelder-Mead",
                options={"maxfev": cfg.maxfev_per_dim * m, "xatol": 1e-10,
                         "fatol": 1e-14, "adaptive": m > 3},
            )
            theta, f = res.x, float(res.fun)
            nfev += res.nfev
        trace.append(f)
        # strict < keeps the earliest start on ties
        if f < best_f:
            best_theta, best_f = theta, f
        if cfg.stop_when_definite and f < -thresholds(symmetrized_form(Q, _theta_to_c(theta)), cfg)[0]:
            break

    scaling = DiagonalScaling.from_weights(_theta_to_c(best_theta))
    cls, lmax, margin, _, note = classify_scaling(Q, scaling, cfg)
    return StabilityCertificate(scaling, cls, lmax, margin, note=note,
                                starts=len(trace), evaluations=nfev,
                                objective_trace=tuple(trace))


def verify_certificate(Q, cert: StabilityCertificate, config=None) -> VerificationReport:
    """Recompute M and its spectrum from scratch and confirm the classification."""
    cfg = config or CertificateConfig()
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(cert.scaling.c, dtype=float)
    m = Q.shape[0]
    positive = bool(c.shape == (m,) and np.all(np.isfinite(c)) and np.all(c > 0))
    if not positive:
        raise VerificationMismatch("scaling is not a strictly positive vector of length m")
    normalized = bool(abs(c.sum() - m) <= 1e-9 * m)
    if not normalized:
        raise VerificationMismatch(f"scaling sums to {c.sum()!r}, expected {m}")

    # independent of symmetrized_form: explicit diagonal matrix products
    C = np.diag(c)
    M = C @ Q + Q.T @ C
    M = 0.5 * (M + M.T)
    cls, lmax, ev = classify(M, cfg)
    if cls is Classification.NEGATIVE_SEMIDEFINITE:
        _, tau_semi = thresholds(M, cfg)
        if (c.min() / c.max() < cfg.min_scaling_ratio
                or _zero_diagonal_defect(Q, M) > tau_semi):
            cls = Classification.INCONCLUSIVE
    if cert.classification is not Classification.INCONCLUSIVE and np.any(np.diag(Q) > 0):
        raise VerificationMismatch("certificate claimed although Q has a positive diagonal entry")
    if cls is not cert.classification:
        raise VerificationMismatch(
            f"certificate claims {cert.classification.value}, recomputation gives {cls.value} "
            f"(lambda_max {lmax:.3e})"
        )
    if not np.isclose(lmax, cert.lambda_max, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(ev).max())):
        raise VerificationMismatch(
            f"lambda_max {cert.lambda_max:.17g} not reproduced (recomputed {lmax:.17g})"
        )
    return VerificationReport(cls, lmax, ev, positive, normalized)
