"""Pure-Python kernels. Reference implementation and fallback for _ckernels."""

import numpy as np

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                          -17253 / 339200, 22 / 525, -1 / 40)

# continuous extension (Hairer, Norsett & Wanner, DOPRI5 dense output)
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0


def log_rhs(lam, A, B, u):
    """du/dt = lambda + A exp(B u) for u = ln x."""
    return lam + A @ np.exp(B @ u)


def _rms(v):
    return np.sqrt(np.mean(v * v))


def _initial_step(lam, A, B, u0, f0, rtol, atol, span):
    sc = atol + rtol * np.abs(u0)
    d0, d1 = _rms(u0 / sc), _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    with np.errstate(over="ignore", invalid="ignore"):
        f1 = log_rhs(lam, A, B, u0 + h0 * f0)
    if not np.all(np.isfinite(f1)):
        return h0 * 1e-3
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def dopri5_log(lam, A, B, u0, t_final, rtol, atol, h_init, max_steps):
    """Adaptive DP5(4) on du/dt = lambda + A exp(B u) from t = 0 to t_final.

    Returns ``(t, U, F, D, accepted, rejected, status)``. Rows of U and F
    are the state and its derivative at every accepted step (row 0 is t=0);
    row k of D is the fifth dense-output coefficient of the step ending at
    t[k] (row 0 unused), see :func:`dense_eval`.
    """
    lam = np.ascontiguousarray(lam, dtype=float)
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    u = np.array(u0, dtype=float)
    t = 0.0
    k1 = log_rhs(lam, A, B, u)
    ts, us, fs, ds = [t], [u.copy()], [k1.copy()], [np.zeros_like(u)]
    if not np.all(np.isfinite(k1)):
        return np.array(ts), np.array(us), np.array(fs), np.array(ds), 0, 0, STATUS_NONFINITE

    h = h_init if h_init > 0 else _initial_step(lam, A, B, u, k1, rtol, atol, t_final)
    accepted = rejected = 0
    status = STATUS_OK
    last_rejected = False
    eps = np.finfo(float).eps
    while t < t_final:
        if accepted + rejected >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < 16 * eps * max(abs(t), 1.0):
            status = STATUS_UNDERFLOW
            break
        last = t + h >= t_final
        if last:
            h = t_final - t

        with np.errstate(over="ignore", invalid="ignore"):
            k2 = log_rhs(lam, A, B, u + h * (A21 * k1))
            k3 = log_rhs(lam, A, B, u + h * (A31 * k1 + A32 * k2))
            k4 = log_rhs(lam, A, B, u + h * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = log_rhs(lam, A, B, u + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = log_rhs(lam, A, B, u + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4
                                             + A65 * k5))
            u_new = u + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = log_rhs(lam, A, B, u_new)
            err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            sc = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
            err_norm = _rms(err / sc)

        if not np.isfinite(err_norm):
            rejected += 1
            last_rejected = True
            h *= FAC_MIN
            continue

        if err_norm <= 1.0:
            ds.append(h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7))
            t = t_final if last else t + h
            u = u_new
            k1 = k7
            accepted += 1
            ts.append(t)
            us.append(u.copy())
            fs.append(k1.copy())
            if err_norm == 0.0:
                fac = FAC_MAX
            else:
                fac = min(FAC_MAX, max(FAC_MIN, SAFETY * err_norm ** -0.2))
            if last_rejected:
                fac = min(fac, 1.0)
            h *= fac
            last_rejected = False
        else:
            rejected += 1
            last_rejected = True
            h *= max(FAC_MIN, SAFETY * err_norm ** -0.2)

    return np.array(ts), np.array(us), np.array(fs), np.array(ds), accepted, rejected, status


def dense_eval(ts, us, fs, ds, tq):
    """Evaluate the DP5 continuous extension at query times ``tq``.

    Within step [t0, t1] with h = t1 - t0 and s = (tq - t0) / h:
    u = r1 + s (r2 + (1 - s) (r3 + s (r4 + (1 - s) r5))).
    """
    tq = np.asarray(tq, dtype=float)
    k = np.clip(np.searchsorted(ts, tq, side="right"), 1, len(ts) - 1)
    t0, t1 = ts[k - 1], ts[k]
    h = t1 - t0
    s = ((tq - t0) / h)[:, None]
    u0, u1 = us[k - 1], us[k]
    r2 = u1 - u0
    r3 = h[:, None] * fs[k - 1] - r2
    r4 = r2 - h[:, None] * fs[k] - r3
    r5 = ds[k]
    return u0 + s * (r2 + (1 - s) * (r3 + s * (r4 + (1 - s) * r5)))
