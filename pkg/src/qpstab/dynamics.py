"""Trajectories in the positive orthant and Liapunov monitoring along them.

Integration runs in u = ln x, where the QP field becomes
du_i/dt = lambda_i + sum_j A_ij exp((B u)_j). Reconstructed states exp(u)
are interior by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .certificate import Classification, CertificateConfig, symmetrized_form, thresholds
from .errors import HypothesisNotMet, NonFiniteState, StepSizeUnderflow
from .liapunov import evaluate_W_batch, evaluate_Wdot_batch
from .model import QPSystem, check_state, interaction_matrix


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    n_samples: int = 256
    max_steps: int = 2_000_000
    h_init: float = 0.0  # 0 selects the step automatically
    backend: str | None = None


@dataclass(frozen=True)
class MonitorConfig:
    terminal_tol: float = 1e-6
    slack_abs: float = 1e-10
    slack_rel: float = 1e-9
    conservation_tol: float = 1e-8


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    W_samples: np.ndarray
    Wdot_samples: np.ndarray
    accepted_steps: int
    rejected_steps: int
    step_times: np.ndarray = field(repr=False)
    step_states: np.ndarray = field(repr=False)
    complete: bool = True
    # log-state, its derivative and the dense-output coefficient at each step
    _dense: tuple = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state_at(self, t):
        """Dense-output state at time(s) ``t`` within the integrated span."""
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        us, fs, ds = self._dense
        if len(self.step_times) < 2:
            out = np.exp(np.repeat(us[:1], len(tq), axis=0))
        else:
            out = np.exp(kernels.dense_eval(self.step_times, us, fs, ds, tq))
        return out[0] if np.ndim(t) == 0 else out

    @property
    def final_state(self):
        return self.states[-1]


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    violations: int
    first_violation: int | None
    max_increase: float
    slack: float
    W_initial: float
    W_final: float
    terminal_distance: float
    terminal_checked: bool
    terminal_ok: bool


@dataclass(frozen=True)
class ConservationReport:
    passed: bool
    relative_drift: float
    W_initial: float
    threshold: float


def integrate(sys: QPSystem, x0, t_final, config=None, scaling=None, xstar=None) -> TrajectoryRecord:
    """Integrate from x0 over [0, t_final], sampling densely at uniform times.

    When ``scaling`` and ``xstar`` are given, W and dW/dt are recorded at the
    samples. Raises StepSizeUnderflow (with the partial record attached) when
    the step size collapses, e.g. on finite-time blowup.
    """
    cfg = config or IntegratorConfig()
    x0 = check_state(sys, x0)
    t_final = float(t_final)
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    ts, us, fs, ds, acc, rej, status = kernels.dopri5_log(
        sys.lam, sys.A, sys.B, np.log(x0), t_final, cfg.rtol, cfg.atol,
        cfg.h_init, cfg.max_steps, backend=cfg.backend,
    )
    t_reached = ts[-1]
    n_samples = max(int(cfg.n_samples), 2)
    if status == kernels.STATUS_OK:
        tq = np.linspace(0.0, t_final, n_samples)
        tq[-1] = t_final
    else:
        full = np.linspace(0.0, t_final, n_samples)
        tq = full[full <= t_reached]
        if tq.size == 0 or tq[-1] < t_reached:
            tq = np.append(tq, t_reached)

    if len(ts) > 1:
        uq = kernels.dense_eval(ts, us, fs, ds, tq)
    else:
        uq = np.repeat(us[:1], len(tq), axis=0)
    with np.errstate(over="ignore", under="ignore"):
        states = np.exp(uq)
        step_states = np.exp(us)

    if scaling is not None and xstar is not None:
        W = evaluate_W_batch(sys, scaling, xstar, states)
        Wdot = evaluate_Wdot_batch(sys, scaling, xstar, states)
    else:
        W = Wdot = np.empty(0)

    record = TrajectoryRecord(tq, states, W, Wdot, int(acc), int(rej), ts, step_states,
                              complete=status == kernels.STATUS_OK, _dense=(us, fs, ds))
    interior = np.all(np.isfinite(states)) and np.all(states > 0)
    if status == kernels.STATUS_NONFINITE or not interior:
        raise NonFiniteState(
            f"state left the representable interior near t = {t_reached:.6g}", record=record
        )
    if status == kernels.STATUS_UNDERFLOW:
        raise StepSizeUnderflow(
            f"step size underflow at t = {t_reached:.6g} (stiffness or blowup)", record=record
        )
    if status == kernels.STATUS_MAX_STEPS:
        raise StepSizeUnderflow(
            f"step budget of {cfg.max_steps} exhausted at t = {t_reached:.6g}", record=record
        )
    return record


def _W_along(sys, c, xstar, record):
    if record.W_samples.size == len(record.times):
        return record.W_samples
    return evaluate_W_batch(sys, c, xstar, record.states)


def monitor_liapunov(sys: QPSystem, cert, xstar, record: TrajectoryRecord,
                     config=None) -> MonotonicityReport:
    """Check that W does not increase along the record.

    Increases up to max(slack_abs, slack_rel * W(0)) are tolerated. For a
    definite certificate the final state must also be within
    ``terminal_tol`` of x* in the infinity norm.
    """
    cfg = config or MonitorConfig()
    xstar = check_state(sys, xstar)
    W = _W_along(sys, cert.scaling, xstar, record)
    slack = max(cfg.slack_abs, cfg.slack_rel * float(W[0]))
    inc = np.diff(W)
    bad = np.flatnonzero(inc > slack)
    dist = float(np.max(np.abs(record.final_state - xstar)))
    definite = cert.classification is Classification.NEGATIVE_DEFINITE
    terminal_ok = dist < cfg.terminal_tol if definite else True
    return MonotonicityReport(
        passed=bool(bad.size == 0 and terminal_ok),
        violations=int(bad.size),
        first_violation=int(bad[0] + 1) if bad.size else None,
        max_increase=float(inc.max()) if inc.size else 0.0,
        slack=slack,
        W_initial=float(W[0]),
        W_final=float(W[-1]),
        terminal_distance=dist,
        terminal_checked=definite,
        terminal_ok=bool(terminal_ok),
    )


def conservation_check(sys: QPSystem, c, xstar, record: TrajectoryRecord,
                       config=None, cert_config=None) -> ConservationReport:
    """Relative drift of W along a trajectory of a conservative system.

    Only meaningful when C Q + Q^T C vanishes (within the semidefinite
    tolerance), so that W is a first integral; otherwise HypothesisNotMet.
    """
    cfg = config or MonitorConfig()
    weights = getattr(c, "c", c)
    M = symmetrized_form(interaction_matrix(sys), weights)
    _, tau_semi = thresholds(M, cert_config or CertificateConfig())
    spread = float(np.max(np.abs(np.linalg.eigvalsh(M))))
    if spread > tau_semi:
        raise HypothesisNotMet(
            f"C Q + Q^T C is not zero (largest |eigenvalue| {spread:.3e} > {tau_semi:.3e}); "
            "W is not a first integral"
        )
    xstar = check_state(sys, xstar)
    W = _W_along(sys, weights, xstar, record)
    W0 = float(W[0])
    drift = float(np.max(np.abs(W - W0))) / max(1.0, W0)
    return ConservationReport(bool(drift < cfg.conservation_tol), drift, W0, cfg.conservation_tol)
