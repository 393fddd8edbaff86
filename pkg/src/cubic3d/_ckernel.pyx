# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) stepper for the polynomial families.

Mirrors :mod:`cubic3d._pykernel` step for step; the two must stay in sync.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, isfinite
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

DEF MAXDIM = 12

cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0, A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0, D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0, D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0


cdef inline void rhs(int code, const double* p, int dim, const double* s, double* out) noexcept nogil:
    cdef double x = s[0], y = s[1], z = s[2]
    cdef double j00, j01, j02, j10, j11, j12, j20, j21, j22
    cdef int c
    if code == 0:
        # jerk form: z' = c3 x^3 + c2 x^2 + c1 x - y - d z
        out[0] = y
        out[1] = z
        out[2] = ((p[0] * x + p[1]) * x + p[2]) * x - y - p[3] * z
        j00 = 0.0; j01 = 1.0; j02 = 0.0
        j10 = 0.0; j11 = 0.0; j12 = 1.0
        j20 = (3.0 * p[0] * x + 2.0 * p[1]) * x + p[2]; j21 = -1.0; j22 = -p[3]
    else:
        out[0] = p[0] * (y - x)
        out[1] = p[1] * x - y - x * z
        out[2] = -p[2] * z + x * y
        j00 = -p[0]; j01 = p[0]; j02 = 0.0
        j10 = p[1] - z; j11 = -1.0; j12 = -x
        j20 = y; j21 = x; j22 = -p[2]
    if dim == 12:
        # tangent matrix stored row-major in s[3:12]; dPhi = J Phi
        for c in range(3):
            out[3 + c] = j00 * s[3 + c] + j01 * s[6 + c] + j02 * s[9 + c]
            out[6 + c] = j10 * s[3 + c] + j11 * s[6 + c] + j12 * s[9 + c]
            out[9 + c] = j20 * s[3 + c] + j21 * s[6 + c] + j22 * s[9 + c]


cdef struct Buffer:
    double* t
    double* y
    double* rc
    Py_ssize_t n
    Py_ssize_t cap
    int dim
    int dense


cdef int buf_push(Buffer* b, double t, const double* y, const double* rc) noexcept nogil:
    cdef Py_ssize_t k
    cdef double* nt
    cdef double* ny
    cdef double* nrc
    if b.n == b.cap:
        b.cap = b.cap * 2
        nt = <double*> realloc(b.t, b.cap * sizeof(double))
        if nt == NULL:
            return -1
        b.t = nt
        ny = <double*> realloc(b.y, b.cap * b.dim * sizeof(double))
        if ny == NULL:
            return -1
        b.y = ny
        if b.dense:
            nrc = <double*> realloc(b.rc, b.cap * 5 * b.dim * sizeof(double))
            if nrc == NULL:
                return -1
            b.rc = nrc
    b.t[b.n] = t
    for k in range(b.dim):
        b.y[b.n * b.dim + k] = y[k]
    if b.dense and rc != NULL:
        for k in range(5 * b.dim):
            b.rc[b.n * 5 * b.dim + k] = rc[k]
    b.n += 1
    return 0


cdef inline double wnorm(int dim, const double* e, const double* y0, const double* y1, double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sk, a, c
    cdef int i
    for i in range(dim):
        a = fabs(y0[i])
        c = fabs(y1[i])
        sk = atol + rtol * (a if a > c else c)
        acc += (e[i] / sk) * (e[i] / sk)
    return sqrt(acc / dim)


def dopri5(int code, double[::1] params, double[::1] y0, double t0, double t1,
           double rtol, double atol, double hmax, double hmin, double radius,
           long max_steps, int mode, double[:, ::1] targets, double capture):
    """Integrate from ``t0`` to ``t1`` (either direction).

    ``mode`` 0 keeps only the endpoints, 1 keeps every accepted step, 2 also
    keeps the five dense-output coefficient rows per step.

    Returns ``(status, t_end, y_end, times, states, dense, info)`` where
    status is 0 done, 1 escaped, 2 step underflow, 3 step budget, 4 non-finite,
    5 captured by a target, and info is ``(n_accept, n_reject, n_fev,
    err_accum, target_index)``.
    """
    cdef int dim = y0.shape[0]
    cdef int ntarget = targets.shape[0]
    cdef double p[8]
    cdef double y[MAXDIM]
    cdef double y1[MAXDIM]
    cdef double ys[MAXDIM]
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef double k5[MAXDIM]
    cdef double k6[MAXDIM]
    cdef double k7[MAXDIM]
    cdef double ev[MAXDIM]
    cdef double rc[5 * MAXDIM]
    cdef double f1[MAXDIM]
    cdef double sk[MAXDIM]
    cdef double tt[24]
    cdef int i, status = 0, hit = -1, last = 0, reject = 0
    cdef long n_acc = 0, n_rej = 0, n_fev = 0
    cdef double t = t0, h, err, fac, hnew, direction, d0, d1, d2, h0, hh, r2, dist2
    cdef double err_accum = 0.0, enorm, ydiff, bspl, sc
    cdef Buffer buf

    if dim != 3 and dim != 12:
        raise ValueError("state dimension must be 3 or 12")
    if ntarget > 8:
        raise ValueError("at most 8 capture targets")
    for i in range(params.shape[0]):
        p[i] = params[i]
    for i in range(ntarget * 3):
        tt[i] = targets[i // 3, i % 3]
    for i in range(dim):
        y[i] = y0[i]

    direction = 1.0 if t1 >= t0 else -1.0
    buf.dim = dim
    buf.dense = 1 if mode == 2 else 0
    buf.n = 0
    buf.cap = 256
    buf.t = <double*> malloc(buf.cap * sizeof(double))
    buf.y = <double*> malloc(buf.cap * dim * sizeof(double))
    buf.rc = <double*> malloc(buf.cap * 5 * dim * sizeof(double)) if buf.dense else NULL
    if buf.t == NULL or buf.y == NULL or (buf.dense and buf.rc == NULL):
        raise MemoryError()

    with nogil:
        buf_push(&buf, t, y, NULL)
        rhs(code, p, dim, y, k1)
        n_fev += 1

        # initial step guess, standard HINIT heuristic
        for i in range(dim):
            sk[i] = atol + rtol * fabs(y[i])
        d0 = 0.0
        d1 = 0.0
        for i in range(dim):
            d0 += (y[i] / sk[i]) * (y[i] / sk[i])
            d1 += (k1[i] / sk[i]) * (k1[i] / sk[i])
        d0 = sqrt(d0 / dim)
        d1 = sqrt(d1 / dim)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        if h0 > hmax:
            h0 = hmax
        for i in range(dim):
            ys[i] = y[i] + direction * h0 * k1[i]
        rhs(code, p, dim, ys, k2)
        n_fev += 1
        d2 = 0.0
        for i in range(dim):
            d2 += ((k2[i] - k1[i]) / sk[i]) * ((k2[i] - k1[i]) / sk[i])
        d2 = sqrt(d2 / dim) / h0
        d1 = d1 if d1 > d2 else d2
        if d1 <= 1e-15:
            hh = h0 * 1e-3
            if hh < 1e-6:
                hh = 1e-6
        else:
            hh = pow(0.01 / d1, 0.2)
        h = 100.0 * h0
        if hh < h:
            h = hh
        if hmax < h:
            h = hmax
        h = direction * h

        if t0 == t1:
            status = 0
        else:
            while True:
                if n_acc >= max_steps:
                    status = 3
                    break
                if fabs(h) < hmin:
                    status = 2
                    break
                if direction * (t + h - t1) >= 0.0:
                    h = t1 - t
                    last = 1
                else:
                    last = 0

                for i in range(dim):
                    ys[i] = y[i] + h * A21 * k1[i]
                rhs(code, p, dim, ys, k2)
                for i in range(dim):
                    ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
                rhs(code, p, dim, ys, k3)
                for i in range(dim):
                    ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                rhs(code, p, dim, ys, k4)
                for i in range(dim):
                    ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                rhs(code, p, dim, ys, k5)
                for i in range(dim):
                    ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                rhs(code, p, dim, ys, k6)
                for i in range(dim):
                    y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
                rhs(code, p, dim, y1, k7)
                n_fev += 6

                for i in range(dim):
                    ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                err = wnorm(dim, ev, y, y1, rtol, atol)

                if not isfinite(err):
                    # overflow inside the stages; shrink hard and retry
                    h = h * 0.1
                    n_rej += 1
                    reject = 1
                    continue

                fac = pow(err, 0.2) / 0.9
                if fac < 0.1:
                    fac = 0.1
                elif fac > 5.0:
                    fac = 5.0
                hnew = h / fac

                if err > 1.0:
                    n_rej += 1
                    reject = 1
                    h = hnew
                    continue

                # accepted
                n_acc += 1
                enorm = 0.0
                for i in range(3):
                    enorm += ev[i] * ev[i]
                err_accum += sqrt(enorm)
                if buf.dense:
                    for i in range(dim):
                        ydiff = y1[i] - y[i]
                        bspl = h * k1[i] - ydiff
                        rc[i] = y[i]
                        rc[dim + i] = ydiff
                        rc[2 * dim + i] = bspl
                        rc[3 * dim + i] = ydiff - h * k7[i] - bspl
                        rc[4 * dim + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                for i in range(dim):
                    y[i] = y1[i]
                    k1[i] = k7[i]
                t = t1 if last else t + h

                if mode != 0 or last:
                    if buf_push(&buf, t, y, rc) != 0:
                        status = -1
                        break

                sc = 0.0
                for i in range(dim):
                    if not isfinite(y[i]):
                        sc = 1.0
                if sc != 0.0:
                    status = 4
                    break
                r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
                if r2 >= radius * radius:
                    status = 1
                    break
                for i in range(ntarget):
                    dist2 = ((y[0] - tt[3 * i]) * (y[0] - tt[3 * i])
                             + (y[1] - tt[3 * i + 1]) * (y[1] - tt[3 * i + 1])
                             + (y[2] - tt[3 * i + 2]) * (y[2] - tt[3 * i + 2]))
                    if dist2 < capture * capture:
                        hit = i
                if hit >= 0:
                    status = 5
                    break
                if last:
                    status = 0
                    break
                if reject and fabs(hnew) > fabs(h):
                    hnew = h
                reject = 0
                if fabs(hnew) > hmax:
                    hnew = direction * hmax
                h = hnew

        if mode == 0 and (buf.n < 2 or buf.t[buf.n - 1] != t):
            buf_push(&buf, t, y, rc)

    if status == -1:
        free(buf.t); free(buf.y)
        if buf.rc != NULL:
            free(buf.rc)
        raise MemoryError()

    times = np.empty(buf.n, dtype=np.float64)
    states = np.empty((buf.n, dim), dtype=np.float64)
    cdef double[::1] tv = times
    cdef double[:, ::1] sv = states
    cdef Py_ssize_t j, m
    for j in range(buf.n):
        tv[j] = buf.t[j]
        for m in range(dim):
            sv[j, m] = buf.y[j * dim + m]
    dense = None
    cdef double[:, :, ::1] dv
    if buf.dense:
        dense = np.empty((buf.n - 1, 5, dim), dtype=np.float64)
        dv = dense
        for j in range(buf.n - 1):
            for m in range(5 * dim):
                dv[j, m // dim, m % dim] = buf.rc[(j + 1) * 5 * dim + m]
    free(buf.t)
    free(buf.y)
    if buf.rc != NULL:
        free(buf.rc)
    yend = np.array([y[i] for i in range(dim)])
    return status, t, yend, times, states, dense, (n_acc, n_rej, n_fev, err_accum, hit)
