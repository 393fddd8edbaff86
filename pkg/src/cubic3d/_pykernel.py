"""Pure-Python Dormand-Prince 5(4) stepper.

Reference twin of the compiled ``_ckernel.dopri5``: same call signature, same
step-size controller, same return tuple.  Used when the extension is not built
or when ``CUBIC3D_PURE=1`` is set.
"""

import math

import numpy as np

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423


def rhs(code, p, s):
    x, y, z = s[0], s[1], s[2]
    out = np.empty_like(s)
    if code == 0:
        out[0] = y
        out[1] = z
        out[2] = ((p[0] * x + p[1]) * x + p[2]) * x - y - p[3] * z
        jac = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                        [(3.0 * p[0] * x + 2.0 * p[1]) * x + p[2], -1.0, -p[3]]])
    else:
        out[0] = p[0] * (y - x)
        out[1] = p[1] * x - y - x * z
        out[2] = -p[2] * z + x * y
        jac = np.array([[-p[0], p[0], 0.0], [p[1] - z, -1.0, -x], [y, x, -p[2]]])
    if s.shape[0] == 12:
        # spelled out so the sum order matches the compiled kernel
        phi = s[3:].reshape(3, 3)
        out[3:] = (jac[:, 0:1] * phi[0] + jac[:, 1:2] * phi[1] + jac[:, 2:3] * phi[2]).ravel()
    return out


def _msq(v):
    # sequential sum of squares over the components, same order as the compiled kernel
    acc = 0.0
    for q in v.tolist():
        acc += q * q
    return acc / len(v)


def _wnorm(e, y0, y1, rtol, atol):
    sk = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return math.sqrt(_msq(e / sk))


def dopri5(code, params, y0, t0, t1, rtol, atol, hmax, hmin, radius,
           max_steps, mode, targets, capture):
    dim = y0.shape[0]
    if dim not in (3, 12):
        raise ValueError("state dimension must be 3 or 12")
    p = np.asarray(params, dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t1 >= t0 else -1.0
    times, states, dense = [t], [y.copy()], []
    n_acc = n_rej = 0
    err_accum = 0.0
    hit = -1
    status = 0

    k1 = rhs(code, p, y)
    n_fev = 1
    sk = atol + rtol * np.abs(y)
    d0 = math.sqrt(_msq(y / sk))
    d1 = math.sqrt(_msq(k1 / sk))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, hmax)
    k2 = rhs(code, p, y + direction * h0 * k1)
    n_fev += 1
    d2 = math.sqrt(_msq((k2 - k1) / sk)) / h0
    d1 = max(d1, d2)
    hh = max(1e-6, h0 * 1e-3) if d1 <= 1e-15 else (0.01 / d1) ** 0.2
    h = direction * min(100.0 * h0, hh, hmax)

    reject = False
    if t0 != t1:
        while True:
            if n_acc >= max_steps:
                status = 3
                break
            if abs(h) < hmin:
                status = 2
                break
            last = direction * (t + h - t1) >= 0.0
            if last:
                h = t1 - t
            k2 = rhs(code, p, y + h * A21 * k1)
            k3 = rhs(code, p, y + h * (A31 * k1 + A32 * k2))
            k4 = rhs(code, p, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = rhs(code, p, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = rhs(code, p, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = rhs(code, p, y1)
            n_fev += 6
            ev = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            with np.errstate(all="ignore"):
                err = _wnorm(ev, y, y1, rtol, atol)
            if not math.isfinite(err):
                h *= 0.1
                n_rej += 1
                reject = True
                continue
            fac = min(max(err ** 0.2 / 0.9, 0.1), 5.0)
            hnew = h / fac
            if err > 1.0:
                n_rej += 1
                reject = True
                h = hnew
                continue

            n_acc += 1
            err_accum += math.sqrt(float(ev[0] ** 2 + ev[1] ** 2 + ev[2] ** 2))
            if mode == 2:
                ydiff = y1 - y
                bspl = h * k1 - ydiff
                dense.append(np.stack([
                    y, ydiff, bspl, ydiff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ]))
            y = y1
            k1 = k7
            t = t1 if last else t + h
            if mode != 0 or last:
                times.append(t)
                states.append(y.copy())
            if not np.all(np.isfinite(y)):
                status = 4
                break
            if y[0] ** 2 + y[1] ** 2 + y[2] ** 2 >= radius * radius:
                status = 1
                break
            for i, tgt in enumerate(targets):
                if float(np.sum((y[:3] - tgt) ** 2)) < capture * capture:
                    hit = i
            if hit >= 0:
                status = 5
                break
            if last:
                status = 0
                break
            if reject and abs(hnew) > abs(h):
                hnew = h
            reject = False
            if abs(hnew) > hmax:
                hnew = direction * hmax
            h = hnew

    if mode == 0 and (len(times) < 2 or times[-1] != t):
        times.append(t)
        states.append(y.copy())
    dense_arr = np.array(dense).reshape(-1, 5, dim) if mode == 2 else None
    return (status, t, y.copy(), np.array(times), np.array(states).reshape(-1, dim),
            dense_arr, (n_acc, n_rej, n_fev, err_accum, hit))
