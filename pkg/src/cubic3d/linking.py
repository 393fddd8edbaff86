"""Winding and linking counts between a closed orbit and a reference curve.

Two independent routes to the same integer:

* :func:`transverse_winding` accumulates the angle of the orbit around the
  curve, measured in the curve's normal planes with a rotation-minimizing
  frame.
* :func:`gauss_linking` evaluates the Gauss linking integral of two closed
  polygons exactly, as a sum of signed spherical-quadrilateral areas.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "dedupe",
    "close_at_infinity",
    "gauss_linking",
    "transverse_winding",
    "rotation_minimizing_frame",
]


def dedupe(poly, eps: float = 1e-12) -> np.ndarray:
    """Drop consecutive vertices closer than ``eps``."""
    poly = np.asarray(poly, dtype=float)
    keep = np.r_[True, np.linalg.norm(np.diff(poly, axis=0), axis=1) > eps]
    return poly[keep]


def _slerp(a, b, n):
    ra, rb = np.linalg.norm(a), np.linalg.norm(b)
    ua, ub = a / ra, b / rb
    omega = np.arccos(np.clip(ua @ ub, -1.0, 1.0))
    ts = np.linspace(0.0, 1.0, n)[1:]
    r = ra + (rb - ra) * ts
    if omega < 1e-12:
        return ua[None, :] * r[:, None]
    pts = (np.sin((1 - ts) * omega)[:, None] * ua + np.sin(ts * omega)[:, None] * ub) / np.sin(omega)
    return pts * r[:, None]


def close_at_infinity(curve, radius: float = 100.0, n_arc: int = 64) -> np.ndarray:
    """Close an open polyline far away: out radially, along the sphere, back in.

    The path on the sphere passes through a waypoint perpendicular to the
    first end so nearly antipodal ends are handled.  Returns a closed
    polygon (last vertex equals the first).
    """
    curve = dedupe(curve)
    start, end = curve[0], curve[-1]
    a = end / np.linalg.norm(end) * radius
    b = start / np.linalg.norm(start) * radius
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 * radius else np.array([1.0, 0.0, 0.0])
    mid = np.cross(a, helper)
    mid = mid / np.linalg.norm(mid) * radius
    arc = np.vstack([a[None, :], _slerp(a, mid, n_arc), _slerp(mid, b, n_arc)])
    return np.vstack([curve, arc, start[None, :]])


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, v / n, 0.0)


def _pair_block(p0, p1, q0, q1):
    r13 = q0 - p0
    r14 = q1 - p0
    r23 = q0 - p1
    r24 = q1 - p1
    n1 = _unit(np.cross(r13, r14))
    n2 = _unit(np.cross(r14, r24))
    n3 = _unit(np.cross(r24, r23))
    n4 = _unit(np.cross(r23, r13))
    area = (np.arcsin(np.clip(np.sum(n1 * n2, -1), -1, 1))
            + np.arcsin(np.clip(np.sum(n2 * n3, -1), -1, 1))
            + np.arcsin(np.clip(np.sum(n3 * n4, -1), -1, 1))
            + np.arcsin(np.clip(np.sum(n4 * n1, -1), -1, 1)))
    sign = np.sign(np.sum(np.cross(q1 - q0, p1 - p0) * r13, -1))
    return float(np.sum(area * sign))


def gauss_linking(p, q, chunk: int = 256) -> float:
    """Gauss linking number of two closed polygons (first vertex repeated last).

    Exact for polygons up to rounding: each segment pair contributes the
    signed area of the quadrilateral it sweeps on the unit sphere
    (Klenin and Langowski, 2000), so the result is an integer to
    floating-point accuracy whenever the polygons are disjoint.
    """
    p = dedupe(p)
    q = dedupe(q)
    q0, q1 = q[:-1][None, :, :], q[1:][None, :, :]
    total = 0.0
    for i in range(0, len(p) - 1, chunk):
        seg = p[i:i + chunk + 1]
        total += _pair_block(seg[:-1][:, None, :], seg[1:][:, None, :], q0, q1)
    return total / (4.0 * np.pi)


def rotation_minimizing_frame(curve) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tangents and two normal fields along a polyline, by double reflection.

    Returns ``(tangent, normal1, normal2)`` at the vertices.
    """
    curve = np.asarray(curve, dtype=float)
    tang = np.gradient(curve, axis=0)
    tang = _unit(tang)
    n = len(curve)
    r = np.empty_like(curve)
    helper = np.array([1.0, 0.0, 0.0]) if abs(tang[0, 0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    r[0] = _unit(np.cross(tang[0], helper))
    for i in range(n - 1):
        v1 = curve[i + 1] - curve[i]
        c1 = v1 @ v1
        if c1 == 0.0:
            r[i + 1] = r[i]
            continue
        rl = r[i] - (2.0 / c1) * (v1 @ r[i]) * v1
        tl = tang[i] - (2.0 / c1) * (v1 @ tang[i]) * v1
        v2 = tang[i + 1] - tl
        c2 = v2 @ v2
        r[i + 1] = rl if c2 == 0.0 else rl - (2.0 / c2) * (v2 @ rl) * v2
        # keep exactly orthonormal against accumulated rounding
        r[i + 1] = _unit(r[i + 1] - (r[i + 1] @ tang[i + 1]) * tang[i + 1])
    s = np.cross(tang, r)
    return tang, r, s


def transverse_winding(orbit, curve, *, window: int = 40, laps: int = 2) -> float:
    """Turns of a closed orbit around an open reference curve.

    Each orbit point is assigned a foot vertex on ``curve`` (nearest vertex,
    tracked locally from the previous foot so it moves continuously); the
    offset from the foot is projected onto the foot's normal plane and its
    angle is read in a rotation-minimizing frame.  When the foot moves by
    more than one vertex, the angle is carried across the intermediate
    vertices with the orbit point held fixed, so the accumulated angle stays
    continuous.  The orbit is traversed ``laps`` times and only the last lap
    is counted, which lets the foot tracking settle into its periodic
    pattern.  Returns accumulated angle / 2 pi (not rounded).
    """
    orbit = dedupe(orbit)
    if np.linalg.norm(orbit[0] - orbit[-1]) < 1e-12:
        orbit = orbit[:-1]
    curve = dedupe(curve)
    tang, n1, n2 = rotation_minimizing_frame(curve)
    tree = cKDTree(curve)
    ncurve = len(curve)

    def angle(p, k):
        d = p - curve[k]
        return np.arctan2(d @ n2[k], d @ n1[k])

    _, foot = tree.query(orbit[0])
    foot = int(foot)
    theta_prev = angle(orbit[0], foot)
    lap_total = 0.0
    npts = len(orbit)
    for lap in range(laps):
        total = 0.0
        for j in range(1, npts + 1):
            p = orbit[j % npts]
            lo, hi = max(0, foot - window), min(ncurve, foot + window + 1)
            seg = curve[lo:hi]
            k = lo + int(np.argmin(np.sum((seg - p) ** 2, axis=1)))
            if k in (lo, hi - 1) and (lo > 0 or hi < ncurve):
                _, k = tree.query(p)
                k = int(k)
            # move the foot with the previous orbit point held fixed
            q = orbit[(j - 1) % npts]
            step = 1 if k > foot else -1
            for m in range(foot + step, k + step, step) if k != foot else ():
                th = angle(q, m)
                total += (th - theta_prev + np.pi) % (2.0 * np.pi) - np.pi
                theta_prev = th
            th = angle(p, k)
            total += (th - theta_prev + np.pi) % (2.0 * np.pi) - np.pi
            theta_prev = th
            foot = k
        lap_total = total
    return lap_total / (2.0 * np.pi)
