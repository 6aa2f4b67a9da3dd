"""Interior equilibria by multistart Newton iteration in log coordinates.

Inside the open orthant the factor x_i never vanishes, so interior fixed
points solve lambda + A phi(x) = 0. With u = ln x this reads

    r(u) = lambda + A exp(B u),    J(u) = A diag(exp(B u)) B,

and every iterate maps back to a strictly positive state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotAnEquilibrium, SingularJacobian
from .model import QPSystem, check_state


@dataclass(frozen=True)
class EquilibriumConfig:
    seed: int = 0
    max_starts: int = 20
    max_iter: int = 100
    residual_rtol: float = 1e-12
    step_tol: float = 1e-14
    start_radius: float = 2.0
    max_step: float = 2.0  # inf-norm cap on a Newton step in u
    jacobian_cond_max: float = 1e14


@dataclass(frozen=True)
class Equilibrium:
    xstar: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    start_index: int = 0


# residual gate used before formulas that are only valid at fixed points
EQUILIBRIUM_GATE_RTOL = 1e-9


def residual(sys: QPSystem, x) -> float:
    """Infinity norm of lambda + A phi(x)."""
    x = check_state(sys, x)
    return float(np.max(np.abs(sys.lam + sys.A @ np.exp(sys.B @ np.log(x)))))


def _residual_scale(sys, x):
    phi = np.exp(sys.B @ np.log(x))
    return 1.0 + np.max(np.abs(sys.lam)) + np.max(np.abs(sys.A) @ phi)


def require_equilibrium(sys: QPSystem, xstar, tol=None) -> np.ndarray:
    """Return ``xstar`` as an array, or raise NotAnEquilibrium.

    The default tolerance is relative to the magnitude of the terms that
    cancel in lambda + A phi(x*).
    """
    xstar = check_state(sys, xstar)
    r = residual(sys, xstar)
    if tol is None:
        tol = EQUILIBRIUM_GATE_RTOL * _residual_scale(sys, xstar)
    if r > tol:
        raise NotAnEquilibrium(
            f"residual {r:.3e} at the supplied point exceeds tolerance {tol:.3e}",
            residual=r,
        )
    return xstar


def _newton(sys, u, cfg, target):
    lam, A, B = sys.lam, sys.A, sys.B
    phi = np.exp(B @ u)
    r = lam + A @ phi
    rn = np.max(np.abs(r))
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if rn <= target:
            return u, rn, it - 1, True
        J = (A * phi) @ B
        if np.linalg.cond(J) > cfg.jacobian_cond_max:
            raise SingularJacobian(f"Newton Jacobian singular at iteration {it}")
        step = np.linalg.solve(J, -r)
        big = np.max(np.abs(step))
        if big > cfg.max_step:
            step *= cfg.max_step / big
        # backtrack on the residual norm; accept the full step near the root
        t = 1.0
        for _ in range(30):
            u_new = u + t * step
            with np.errstate(over="ignore", invalid="ignore"):
                phi_new = np.exp(B @ u_new)
                r_new = lam + A @ phi_new
            rn_new = np.max(np.abs(r_new))
            if np.isfinite(rn_new) and rn_new < rn:
                break
            t *= 0.5
        else:
            # no decrease available: we are at roundoff level or stuck
            return u, rn, it, rn <= target
        u, phi, r, rn = u_new, phi_new, r_new, rn_new
        if t * np.max(np.abs(step)) <= cfg.step_tol:
            return u, rn, it, rn <= target
    return u, rn, cfg.max_iter, rn <= target


def find_equilibrium(sys: QPSystem, initial_guess=None, config=None) -> Equilibrium:
    """Locate an interior fixed point.

    Starts from ``initial_guess`` (or x = 1), then from up to
    ``config.max_starts`` seeded draws u ~ U[-r, r]^n. The first converged
    root is returned. Other interior equilibria may exist; no uniqueness is
    implied.
    """
    cfg = config or EquilibriumConfig()
    n = sys.n
    if initial_guess is None:
        u0 = np.zeros(n)
    else:
        u0 = np.log(check_state(sys, initial_guess))
    rng = np.random.default_rng(cfg.seed)
    starts = [u0] + [rng.uniform(-cfg.start_radius, cfg.start_radius, n)
                     for _ in range(cfg.max_starts)]
    target = cfg.residual_rtol * (1.0 + np.max(np.abs(sys.lam)))

    best = None
    singular = 0
    for k, u in enumerate(starts):
        try:
            u_end, rn, its, ok = _newton(sys, np.array(u, dtype=float), cfg, target)
        except (SingularJacobian, np.linalg.LinAlgError):
            singular += 1
            continue
        cand = Equilibrium(np.exp(u_end), float(rn), its, bool(ok), k)
        if ok:
            return cand
        if best is None or cand.residual_norm < best.residual_norm:
            best = cand
    msg = f"no start converged ({len(starts)} starts, {singular} hit a singular Jacobian)"
    if best is not None:
        msg += f"; best residual {best.residual_norm:.3e}"
    if singular == len(starts):
        raise SingularJacobian(msg)
    raise NoConvergence(msg, best=best)
