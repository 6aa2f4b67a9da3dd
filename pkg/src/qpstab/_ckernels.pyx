# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same contract as qpstab._pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, isfinite, pow
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF STATUS_OK = 0
DEF STATUS_UNDERFLOW = 1
DEF STATUS_NONFINITE = 2
DEF STATUS_MAX_STEPS = 3

cdef double C_EPS = 2.220446049250313e-16

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784
cdef double A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0


cdef struct Sys:
    int n
    int m
    const double* lam
    const double* A      # n x m row-major
    const double* B      # m x n row-major
    double* phi    # scratch, length m


cdef inline void rhs(Sys* s, double* u, double* out) noexcept nogil:
    cdef int i, j
    cdef double acc
    for i in range(s.m):
        acc = 0.0
        for j in range(s.n):
            acc += s.B[i * s.n + j] * u[j]
        s.phi[i] = exp(acc)
    for i in range(s.n):
        acc = s.lam[i]
        for j in range(s.m):
            acc += s.A[i * s.m + j] * s.phi[j]
        out[i] = acc


cdef inline double rms_scaled(double* v, double* u0, int n,
                              double rtol, double atol) noexcept nogil:
    cdef int i
    cdef double acc = 0.0, sc, q
    for i in range(n):
        sc = atol + rtol * fabs(u0[i])
        q = v[i] / sc
        acc += q * q
    return sqrt(acc / n)


def log_rhs(lam, A, B, u):
    return np.asarray(lam, float) + np.asarray(A, float) @ np.exp(np.asarray(B, float) @ np.asarray(u, float))


cdef double initial_step(Sys* s, double* u0, double* f0, double rtol, double atol,
                         double span, double* tmp, double* f1) noexcept nogil:
    cdef int i, n = s.n
    cdef double d0 = rms_scaled(u0, u0, n, rtol, atol)
    cdef double d1 = rms_scaled(f0, u0, n, rtol, atol)
    cdef double h0, h1, d2, acc, q
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    for i in range(n):
        tmp[i] = u0[i] + h0 * f0[i]
    rhs(s, tmp, f1)
    acc = 0.0
    for i in range(n):
        if not isfinite(f1[i]):
            return h0 * 1e-3
        q = (f1[i] - f0[i]) / (atol + rtol * fabs(u0[i]))
        acc += q * q
    d2 = sqrt(acc / n) / h0
    if d1 > d2:
        d2 = d1
    if d2 <= 1e-15:
        h1 = 1e-6 if h0 * 1e-3 < 1e-6 else h0 * 1e-3
    else:
        h1 = pow(0.01 / d2, 0.2)
    if h1 > 100 * h0:
        h1 = 100 * h0
    if h1 > span:
        h1 = span
    return h1


def dopri5_log(lam, A, B, u0, double t_final, double rtol, double atol,
               double h_init, long max_steps):
    cdef const double[::1] lam_v = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[:, ::1] A_v = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] B_v = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[::1] u0_v = np.array(u0, dtype=np.float64)
    cdef int n = A_v.shape[0], m = A_v.shape[1]
    cdef Sys s
    cdef int i
    cdef long cap = 1024, count = 0
    cdef long accepted = 0, rejected = 0
    cdef int status = STATUS_OK
    cdef bint last, last_rejected = False, finite
    cdef double t = 0.0, h, err_norm, fac, q, sc, acc

    ts = np.empty(cap)
    us = np.empty((cap, n))
    fs = np.empty((cap, n))
    ds = np.zeros((cap, n))
    cdef double[::1] ts_v = ts
    cdef double[:, ::1] us_v = us
    cdef double[:, ::1] fs_v = fs
    cdef double[:, ::1] ds_v = ds

    cdef double* work = <double*> malloc(sizeof(double) * (11 * n + m))
    if work == NULL:
        raise MemoryError()
    cdef double* u = work
    cdef double* k1 = work + n
    cdef double* k2 = work + 2 * n
    cdef double* k3 = work + 3 * n
    cdef double* k4 = work + 4 * n
    cdef double* k5 = work + 5 * n
    cdef double* k6 = work + 6 * n
    cdef double* k7 = work + 7 * n
    cdef double* tmp = work + 8 * n
    cdef double* unew = work + 9 * n
    cdef double* err = work + 10 * n
    s.n = n
    s.m = m
    s.lam = &lam_v[0]
    s.A = &A_v[0, 0]
    s.B = &B_v[0, 0]
    s.phi = work + 11 * n

    try:
        for i in range(n):
            u[i] = u0_v[i]
        rhs(&s, u, k1)
        ts_v[0] = 0.0
        for i in range(n):
            us_v[0, i] = u[i]
            fs_v[0, i] = k1[i]
        count = 1
        finite = True
        for i in range(n):
            if not isfinite(k1[i]):
                finite = False
        if not finite:
            return (ts[:1].copy(), us[:1].copy(), fs[:1].copy(), ds[:1].copy(),
                    0, 0, STATUS_NONFINITE)

        if h_init > 0:
            h = h_init
        else:
            h = initial_step(&s, u, k1, rtol, atol, t_final, tmp, k2)

        while t < t_final:
            if accepted + rejected >= max_steps:
                status = STATUS_MAX_STEPS
                break
            if h < 16 * C_EPS * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = STATUS_UNDERFLOW
                break
            last = t + h >= t_final
            if last:
                h = t_final - t

            with nogil:
                for i in range(n):
                    tmp[i] = u[i] + h * (A21 * k1[i])
                rhs(&s, tmp, k2)
                for i in range(n):
                    tmp[i] = u[i] + h * (A31 * k1[i] + A32 * k2[i])
                rhs(&s, tmp, k3)
                for i in range(n):
                    tmp[i] = u[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                rhs(&s, tmp, k4)
                for i in range(n):
                    tmp[i] = u[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                rhs(&s, tmp, k5)
                for i in range(n):
                    tmp[i] = u[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                         + A65 * k5[i])
                rhs(&s, tmp, k6)
                for i in range(n):
                    unew[i] = u[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                                          + A76 * k6[i])
                rhs(&s, unew, k7)
                acc = 0.0
                for i in range(n):
                    err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                                  + E6 * k6[i] + E7 * k7[i])
                    sc = fabs(u[i])
                    if fabs(unew[i]) > sc:
                        sc = fabs(unew[i])
                    sc = atol + rtol * sc
                    q = err[i] / sc
                    acc += q * q
                err_norm = sqrt(acc / n)

            if not isfinite(err_norm):
                rejected += 1
                last_rejected = True
                h *= FAC_MIN
                continue

            if err_norm <= 1.0:
                if count == cap:
                    cap *= 2
                    ts = np.resize(ts, cap)
                    us = np.resize(us, (cap, n)) if n else us
                    fs = np.resize(fs, (cap, n)) if n else fs
                    ds = np.resize(ds, (cap, n)) if n else ds
                    ts_v = ts
                    us_v = us
                    fs_v = fs
                    ds_v = ds
                for i in range(n):
                    ds_v[count, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                                          + D6 * k6[i] + D7 * k7[i])
                t = t_final if last else t + h
                for i in range(n):
                    u[i] = unew[i]
                    k1[i] = k7[i]
                accepted += 1
                ts_v[count] = t
                for i in range(n):
                    us_v[count, i] = u[i]
                    fs_v[count, i] = k1[i]
                count += 1
                if err_norm == 0.0:
                    fac = FAC_MAX
                else:
                    fac = SAFETY * pow(err_norm, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                    if fac > FAC_MAX:
                        fac = FAC_MAX
                if last_rejected and fac > 1.0:
                    fac = 1.0
                h *= fac
                last_rejected = False
            else:
                rejected += 1
                last_rejected = True
                fac = SAFETY * pow(err_norm, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
                h *= fac
    finally:
        free(work)

    return (ts[:count].copy(), us[:count].copy(), fs[:count].copy(), ds[:count].copy(),
            accepted, rejected, status)
