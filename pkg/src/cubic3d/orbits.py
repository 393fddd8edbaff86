"""Closed orbits: detection, Newton refinement, Floquet multipliers, symmetry,
rotation numbers about the origin's 1D stable manifold, Lyapunov spectra."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import (AmbiguousWindingError, EscapedError, IntegrationError, NotFoundError,
                     PreconditionError)
from .integrator import (PlaneEvent, Tolerances, advance, flow_with_monodromy, integrate,
                         plane_crossings)
from .linking import close_at_infinity, gauss_linking, transverse_winding
from .manifolds import Stability, trace_1d
from .spectral import equilibria
from .systems import SystemDef, divergence, eval_field, symmetry_matrix

__all__ = [
    "Symmetry",
    "OrbitSettings",
    "ClosedOrbit",
    "ReferenceCurve",
    "LyapunovSpectrum",
    "detect_closed_orbit",
    "refine_orbit",
    "build_orbit",
    "reference_curve",
    "rotation_number",
    "linking_oracle",
    "classify_symmetry",
    "floquet",
    "lyapunov_spectrum",
]

WINDING_MARGIN = 0.05


class Symmetry(str, enum.Enum):
    SELF_SYMMETRIC = "self_symmetric"
    TWIN = "twin"


@dataclass(frozen=True)
class OrbitSettings:
    transient: float = 300.0
    tail: float = 400.0
    max_time: float = 3000.0
    recurrence: float = 1e-3
    velocity_cos: float = 0.99
    newton_max_iter: int = 30
    newton_tol: float = 1e-10
    return_tol: float = 1e-8
    refine_tol: Tolerances = Tolerances(abs_tol=1e-12, rel_tol=1e-12)
    require_stable: bool = True
    samples_per_unit: float = 200.0
    min_samples: int = 2000
    symmetry_tol: float = 1e-5


@dataclass(frozen=True, eq=False)
class ClosedOrbit:
    """A refined periodic orbit.

    ``samples`` covers one period uniformly in time, starting at ``anchor``
    (the closing point is not repeated).
    """

    system: SystemDef
    period: float
    anchor: np.ndarray
    samples: np.ndarray
    floquet: np.ndarray
    residual: float
    rotation_number: int | None = None
    symmetry: Symmetry | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def nontrivial_multipliers(self) -> np.ndarray:
        k = int(np.argmin(np.abs(self.floquet - 1.0)))
        return np.delete(self.floquet, k)

    @property
    def is_attracting(self) -> bool:
        return bool(np.all(np.abs(self.nontrivial_multipliers) < 1.0))

    @property
    def closed_samples(self) -> np.ndarray:
        return np.vstack([self.samples, self.samples[:1]])

    def image(self) -> "ClosedOrbit":
        """The orbit mapped through the family's symmetry."""
        m = symmetry_matrix(self.system)
        return replace(self, anchor=m @ self.anchor, samples=self.samples @ m.T,
                       symmetry=self.symmetry, diagnostics=dict(self.diagnostics))

    def summary(self) -> dict:
        return {
            "period": self.period,
            "anchor": [float(v) for v in self.anchor],
            "rotation_number": self.rotation_number,
            "symmetry": self.symmetry.value if self.symmetry else None,
            "multipliers": [[float(z.real), float(z.imag)] for z in self.floquet],
            "return_residual": self.residual,
            "attracting": self.is_attracting,
        }


# -- refinement ---------------------------------------------------------------

def refine_orbit(sys: SystemDef, anchor, period: float, settings: OrbitSettings | None = None):
    """Newton shooting for a periodic orbit near ``(anchor, period)``.

    Solves phi_T(s) = s with s constrained to the plane through the initial
    anchor normal to the flow; the period is a free unknown, so each step
    solves the bordered 4x4 system [[M - I, f(phi_T(s))], [n^T, 0]].
    Damped by step halving when the residual grows.

    Returns ``(anchor, period, residual, iterations)``; raises NotFoundError
    on divergence.
    """
    settings = settings or OrbitSettings()
    tol = settings.refine_tol
    s = np.array(anchor, dtype=float)
    T = float(period)
    n = eval_field(sys, s)
    n = n / np.linalg.norm(n)
    a0 = s.copy()

    def residual(s, T):
        mono = flow_with_monodromy(sys, s, T, tol)
        return mono, mono.final_state - s

    try:
        mono, r = residual(s, T)
    except IntegrationError as exc:
        raise NotFoundError("orbit candidate escaped", {"error": str(exc)}) from None
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    for it in range(settings.newton_max_iter):
        if rnorm < settings.newton_tol:
            break
        A = np.zeros((4, 4))
        A[:3, :3] = mono.matrix - np.eye(3)
        A[:3, 3] = eval_field(sys, mono.final_state)
        A[3, :3] = n
        rhs = -np.concatenate([r, [n @ (s - a0)]])
        try:
            delta = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            raise NotFoundError("singular shooting matrix", {"history": history}) from None
        lam = 1.0
        for _ in range(8):
            s_new, T_new = s + lam * delta[:3], T + lam * delta[3]
            if T_new <= 0:
                lam *= 0.5
                continue
            try:
                mono_new, r_new = residual(s_new, T_new)
            except IntegrationError:
                lam *= 0.5
                continue
            if np.linalg.norm(r_new) < rnorm or lam < 0.01:
                break
            lam *= 0.5
        else:
            raise NotFoundError("Newton damping failed", {"history": history})
        s, T, mono, r = s_new, T_new, mono_new, r_new
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if not math.isfinite(rnorm) or rnorm > 1.0:
            raise NotFoundError("Newton diverged", {"history": history})
    if rnorm >= settings.return_tol:
        raise NotFoundError("Newton did not reach the return tolerance", {"history": history})
    return s, T, rnorm, len(history) - 1


def build_orbit(sys: SystemDef, anchor, period: float, settings: OrbitSettings | None = None,
                residual: float | None = None, diagnostics: dict | None = None) -> ClosedOrbit:
    """Sample one period and compute Floquet multipliers for a refined orbit."""
    settings = settings or OrbitSettings()
    tol = settings.refine_tol
    anchor = np.asarray(anchor, dtype=float)
    traj = integrate(sys, anchor, (0.0, period), tol)
    n = max(settings.min_samples, int(period * settings.samples_per_unit))
    ts = np.linspace(0.0, period, n + 1)[:-1]
    samples = traj.at(ts)
    mono = flow_with_monodromy(sys, anchor, period, tol)
    if residual is None:
        residual = float(np.linalg.norm(mono.final_state - anchor))
    mult = np.linalg.eigvals(mono.matrix)
    mult = mult[np.argsort(-np.abs(mult))]
    return ClosedOrbit(sys, float(period), anchor, samples, mult, float(residual),
                       diagnostics=dict(diagnostics or {}))


def floquet(orbit: ClosedOrbit) -> np.ndarray:
    """Eigenvalues of the monodromy matrix over one period at the anchor."""
    mono = flow_with_monodromy(orbit.system, orbit.anchor, orbit.period, OrbitSettings().refine_tol)
    mult = np.linalg.eigvals(mono.matrix)
    return mult[np.argsort(-np.abs(mult))]


# -- detection ----------------------------------------------------------------

def _recurrences(sys, traj, anchor, settings, threshold):
    f = eval_field(sys, anchor)
    plane = PlaneEvent(tuple(f), float(f @ anchor) / 1.0, 1)
    f_unit = f / np.linalg.norm(f)
    out = []
    for c in plane_crossings(traj, plane):
        if c.time - traj.t0 < 1e-6:
            continue
        d = float(np.linalg.norm(c.state - anchor))
        g = eval_field(sys, c.state)
        cos = float(g @ f_unit / np.linalg.norm(g))
        if d < threshold and cos > settings.velocity_cos:
            out.append((c.time - traj.t0, d))
    return out


def _submultiple(sys, anchor, period, settings, max_divisor: int = 8) -> int:
    """Largest k > 1 with the orbit already closing at T/k, or 1.

    Guards against accepting an orbit traversed several times.
    """
    scale = max(1.0, float(np.linalg.norm(anchor)))
    for k in range(max_divisor, 1, -1):
        s = advance(sys, anchor, period / k, settings.refine_tol)[1]
        if float(np.linalg.norm(s - anchor)) < 1e-5 * scale:
            return k
    return 1


def detect_closed_orbit(sys: SystemDef, s0, settings: OrbitSettings | None = None,
                        tol: Tolerances | None = None) -> ClosedOrbit:
    """Find the closed orbit that the trajectory from ``s0`` settles on.

    Integrates past ``settings.transient``, then looks in a tail window for
    near-returns to the section through the tail's first point; each
    candidate period (shortest first) is Newton-refined and accepted when it
    closes, is minimal and, with ``require_stable``, is attracting.  Repeats
    with later tails up to ``max_time`` and finally with a 10x looser
    recurrence threshold.
    """
    settings = settings or OrbitSettings()
    tol = tol or Tolerances()
    t, s, escaped = advance(sys, s0, settings.transient, tol)
    if escaped:
        raise NotFoundError("trajectory escaped during the transient", {"time": t})
    elapsed = settings.transient
    tried = []
    while True:
        traj = integrate(sys, s, (0.0, settings.tail), tol)
        if traj.escaped:
            raise NotFoundError("trajectory escaped", {"time": elapsed + traj.t_final})
        last_round = elapsed + settings.tail >= settings.max_time
        thresholds = [settings.recurrence] + ([10 * settings.recurrence] if last_round else [])
        for threshold in thresholds:
            for T, d in _recurrences(sys, traj, s, settings, threshold):
                if any(abs(T - T0) < 1e-3 * T for T0 in tried):
                    continue
                tried.append(T)
                try:
                    anchor, period, res, iters = refine_orbit(sys, s, T, settings)
                except NotFoundError:
                    continue
                try:
                    while (k := _submultiple(sys, anchor, period, settings)) > 1:
                        anchor, period, res, iters = refine_orbit(sys, anchor, period / k, settings)
                except NotFoundError:
                    continue
                orbit = build_orbit(sys, anchor, period, settings, res, {
                    "newton_iterations": iters, "recurrence_distance": d,
                    "detected_at": elapsed, "seed": [float(v) for v in np.asarray(s0, float)],
                    "anchor_shift": float(np.linalg.norm(anchor - s))})
                if settings.require_stable and not orbit.is_attracting:
                    continue
                return orbit
        if last_round:
            raise NotFoundError("no recurrence refined to a closed orbit",
                                {"tried_periods": tried, "max_time": settings.max_time})
        s = traj.final_state
        elapsed += settings.tail


# -- rotation number ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReferenceCurve:
    """Both branches of the origin's 1D stable manifold as one polyline.

    ``points`` runs from the far end of the ``+`` branch through the origin
    to the far end of the ``-`` branch; ``closed`` adds the closure on the
    sphere of radius ``closure_radius``.
    """

    points: np.ndarray
    closed: np.ndarray
    truncate_radius: float
    closure_radius: float


def _resample(poly, h_near=0.01, growth=0.05, n_max=20000):
    """Arc-length resampling with spacing h_near * (1 + growth * |p|^2)."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.r_[0.0, np.cumsum(seg)]
    r = np.linalg.norm(poly, axis=1)
    dens = 1.0 / (h_near * (1.0 + growth * r**2))
    u = np.r_[0.0, np.cumsum(0.5 * (dens[1:] + dens[:-1]) * seg)]
    m = int(min(n_max, max(50, math.ceil(u[-1]))))
    targets = np.linspace(0.0, u[-1], m + 1)
    st = np.interp(targets, u, s)
    return np.column_stack([np.interp(st, s, poly[:, k]) for k in range(3)])


def reference_curve(sys: SystemDef, tol: Tolerances | None = None, truncate_radius: float = 50.0,
                    closure_radius: float = 100.0, seed_offset: float = 1e-6) -> ReferenceCurve:
    """Trace the origin's 1D stable manifold (both branches) for winding counts."""
    tol = replace(tol or Tolerances(), escape_radius=truncate_radius)
    p0 = equilibria(sys)[0]
    branches = []
    for tag in (1, -1):
        br = trace_1d(p0, Stability.STABLE, tag, seed_offset, tol, max_time=1e4)
        traj = br.trajectory
        ts = np.linspace(traj.times[0], traj.times[-1], 20 * len(traj.times))
        pts = traj.at(ts)
        r = np.linalg.norm(pts, axis=1)
        pts = pts[: int(np.searchsorted(r > truncate_radius, True)) or len(pts)]
        branches.append(pts)
    poly = np.vstack([branches[0][::-1], p0.location[None, :], branches[1]])
    poly = _resample(poly)
    return ReferenceCurve(poly, close_at_infinity(poly, closure_radius), truncate_radius, closure_radius)


def _orbit_polygon(orbit: ClosedOrbit, max_points: int) -> np.ndarray:
    samples = orbit.samples
    step = max(1, len(samples) // max_points)
    pts = samples[::step]
    return np.vstack([pts, pts[:1]])


def _round(value: float, what: str) -> int:
    k = int(round(value))
    if abs(value - k) >= WINDING_MARGIN:
        raise AmbiguousWindingError(f"{what} {value:.4f} is not within {WINDING_MARGIN} of an integer", value)
    return k


def rotation_number(orbit: ClosedOrbit, ref: ReferenceCurve) -> int:
    """Turns of the orbit around the origin's 1D stable manifold (absolute value).

    Angle accumulation in the reference curve's normal planes; the signed
    count is kept in ``orbit.diagnostics`` only through :func:`winding_raw`.
    """
    return abs(_round(winding_raw(orbit, ref), "transverse winding"))


def winding_raw(orbit: ClosedOrbit, ref: ReferenceCurve) -> float:
    return transverse_winding(_orbit_polygon(orbit, 6000), ref.points)


def linking_oracle(orbit: ClosedOrbit, ref: ReferenceCurve) -> int:
    """Gauss linking number of the orbit with the closed reference curve (absolute value)."""
    return abs(_round(linking_raw(orbit, ref), "Gauss linking integral"))


def linking_raw(orbit: ClosedOrbit, ref: ReferenceCurve) -> float:
    return gauss_linking(_orbit_polygon(orbit, 3000), ref.closed)


# -- symmetry -----------------------------------------------------------------

def _polyline_distance(points, poly) -> np.ndarray:
    """Distance from each point to a closed polyline (vertex KD-tree + adjacent segments)."""
    closed = np.vstack([poly, poly[:1]])
    tree = cKDTree(poly)
    _, idx = tree.query(points)
    best = np.full(len(points), np.inf)
    n = len(poly)
    for off in (-1, 0):
        i0 = (idx + off) % n
        a = closed[i0]
        b = closed[i0 + 1]
        ab = b - a
        t = np.clip(np.sum((points - a) * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300), 0, 1)
        d = np.linalg.norm(points - (a + t[:, None] * ab), axis=1)
        best = np.minimum(best, d)
    return best


def symmetric_distance(orbit: ClosedOrbit) -> float:
    """Hausdorff distance between the orbit and its symmetry image."""
    m = symmetry_matrix(orbit.system)
    image = orbit.samples @ m.T
    return float(max(_polyline_distance(image, orbit.samples).max(),
                     _polyline_distance(orbit.samples, image).max()))


def classify_symmetry(orbit: ClosedOrbit, tol: float | None = None) -> tuple[Symmetry, ClosedOrbit | None]:
    """``(SELF_SYMMETRIC, None)`` or ``(TWIN, partner)`` with the partner as the mapped orbit."""
    tol = OrbitSettings().symmetry_tol if tol is None else tol
    if symmetric_distance(orbit) < tol:
        return Symmetry.SELF_SYMMETRIC, None
    return Symmetry.TWIN, orbit.image()


def annotate(orbit: ClosedOrbit, ref: ReferenceCurve | None = None) -> ClosedOrbit:
    """Attach rotation number (checked against the linking oracle) and symmetry."""
    ref = ref or reference_curve(orbit.system)
    w = winding_raw(orbit, ref)
    lk = linking_raw(orbit, ref)
    rot = abs(_round(w, "transverse winding"))
    oracle = abs(_round(lk, "Gauss linking integral"))
    diag = dict(orbit.diagnostics, winding=w, linking=lk, symmetric_distance=symmetric_distance(orbit))
    if rot != oracle:
        diag["oracle_disagreement"] = True
        raise AmbiguousWindingError(f"winding {w:.3f} disagrees with linking {lk:.3f}", w)
    sym, _ = classify_symmetry(orbit)
    return replace(orbit, rotation_number=rot, symmetry=sym, diagnostics=diag)


# -- Lyapunov spectrum --------------------------------------------------------

@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: np.ndarray
    integration_time: float
    convergence_history: np.ndarray  # rows: (time, l1, l2, l3)
    divergence: float

    def summary(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "sum": float(np.sum(self.exponents)),
            "divergence": self.divergence,
            "integration_time": self.integration_time,
        }


def lyapunov_spectrum(sys: SystemDef, s0, T_total: float = 5000.0, renorm_dt: float = 1.0,
                      tol: Tolerances | None = None, transient: float = 200.0,
                      history_every: int = 50) -> LyapunovSpectrum:
    """Benettin estimate with QR re-orthonormalization every ``renorm_dt``."""
    tol = tol or Tolerances()
    if renorm_dt <= 0 or T_total <= 0:
        raise PreconditionError("T_total and renorm_dt must be positive")
    t, s, escaped = advance(sys, s0, transient, tol) if transient > 0 else (0.0, np.asarray(s0, float), False)
    if escaped:
        raise EscapedError("trajectory escaped during the transient", t, s)
    q = np.eye(3)
    sums = np.zeros(3)
    n_steps = int(round(T_total / renorm_dt))
    history = []
    elapsed = 0.0
    for k in range(1, n_steps + 1):
        try:
            mono = _tangent_flow(sys, s, q, renorm_dt, tol)
        except IntegrationError as exc:
            raise EscapedError("trajectory escaped during the Lyapunov run", elapsed, exc.last_state) from None
        s, phi = mono
        q, r = np.linalg.qr(phi)
        d = np.diag(r)
        signs = np.sign(d)
        signs[signs == 0] = 1.0
        q = q * signs
        sums += np.log(np.abs(d))
        elapsed += renorm_dt
        if k % history_every == 0 or k == n_steps:
            history.append([elapsed, *(sums / elapsed)])
    exps = np.sort(sums / elapsed)[::-1]
    return LyapunovSpectrum(exps, elapsed, np.array(history), divergence(sys))


def _tangent_flow(sys, s, q, dt, tol):
    from .integrator import _run
    y0 = np.concatenate([s, q.ravel()])
    status, t_end, y_end, *_ = _run(sys, y0, 0.0, dt, tol, 0)
    if status != 0:
        raise IntegrationError(f"tangent flow stopped with status {status}", t_end, y_end[:3], status)
    return y_end[:3].copy(), y_end[3:].reshape(3, 3)
