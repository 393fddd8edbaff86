"""Attractor-class sampling, regime classification, parameter scans and bisections.

The attractor class is represented by an omega-limit point cloud: seeds on
the origin's unstable eigen-plane are integrated past a transient and their
states are sampled.  This is an inner approximation of the closure in the
set-theoretic definition, which is not computable.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (AmbiguousWindingError, Cubic3dError, NoBracketError, NotFoundError,
                     PreconditionError, StructureMismatchError)
from .integrator import PlaneEvent, Tolerances, crossings, integrate
from .manifolds import FateKind, Stability, inner_branch_tag, ring_seeds, trace_1d
from .orbits import ClosedOrbit, OrbitSettings, Symmetry, annotate, detect_closed_orbit, reference_curve
from .spectral import Kind, equilibria
from .systems import SystemDef, cubic2, cubic2prime, symmetry_matrix

__all__ = [
    "AtlasSettings",
    "AttractorSample",
    "Verdict",
    "Arrangement",
    "Classification",
    "FaintVerdict",
    "FaintnessResult",
    "BifurcationKind",
    "BifurcationResult",
    "ScanRow",
    "sample_attractor_class",
    "cross_section",
    "faintness_test",
    "measure_dwell",
    "find_orbit",
    "classify_parameter",
    "scan",
    "bisect_rotation",
    "bisect_branch_fate",
    "bisect_twin_merge",
]

_FAMILIES = {"cubic2": cubic2, "cubic2prime": cubic2prime}
DEFAULT_SEED_PAIRS = ((1.2, 0.0, -1.5), (0.5, 0.0, 0.0), (0.1, 0.1, 0.1), (0.9, 0.3, -0.4))


@dataclass(frozen=True)
class AtlasSettings:
    a: float = 1.0
    family: str = "cubic2"
    n_seeds: int = 8
    ring_radius: float = 1e-4
    transient: float = 300.0
    sample_time: float = 500.0
    sample_dt: float = 0.05
    tol: Tolerances = Tolerances()
    # faint-attractor test
    delta_visit: float = 0.1
    t_visit_min: float = 10.0
    faint_max_time: float = 50000.0
    dwell_dt: float = 0.05
    # orbit search
    seed_pairs: tuple = DEFAULT_SEED_PAIRS
    orbit: OrbitSettings = OrbitSettings()
    hopf_amplitude: float = 0.1
    # manifold fate
    fate_max_time: float = 2000.0

    def system(self, b: float) -> SystemDef:
        if self.family not in _FAMILIES:
            raise PreconditionError(f"atlas supports {sorted(_FAMILIES)}, not {self.family!r}")
        return _FAMILIES[self.family](b, self.a)

    def tightened(self, factor: float = 100.0) -> "AtlasSettings":
        return replace(self, tol=self.tol.scaled(1.0 / factor))

    def seeds(self) -> list[tuple[float, float, float]]:
        out = []
        for s in self.seed_pairs:
            out.append(tuple(float(v) for v in s))
            out.append(tuple(-float(v) for v in s))
        return out


# -- attractor class ----------------------------------------------------------

@dataclass(frozen=True)
class EscapeRecord:
    seed_index: int
    time: float
    state: np.ndarray


@dataclass(frozen=True, eq=False)
class AttractorSample:
    b: float
    points: np.ndarray
    bounded: bool
    bounding_radius: float
    system: SystemDef
    starts: np.ndarray                 # states at the end of the transient (bounded seeds)
    escapes: tuple = ()
    settings: AtlasSettings = AtlasSettings()

    def tree(self) -> cKDTree:
        return cKDTree(self.points)


def sample_attractor_class(b: float, settings: AtlasSettings | None = None,
                           sys: SystemDef | None = None) -> AttractorSample:
    """Omega-limit cloud of seeds on the origin's unstable eigen-plane."""
    settings = settings or AtlasSettings()
    sys = sys or settings.system(b)
    if settings.n_seeds < 2 or settings.sample_time <= 0:
        raise PreconditionError("need at least 2 seeds and a positive sample time")
    p0 = equilibria(sys)[0]
    try:
        _, seeds = ring_seeds(p0, settings.n_seeds, settings.ring_radius)
    except LookupError:
        raise StructureMismatchError("origin has no complex eigenvalue pair") from None
    t_end = settings.transient + settings.sample_time
    ts = np.arange(settings.transient + settings.sample_dt, t_end + 0.5 * settings.sample_dt,
                   settings.sample_dt)
    clouds, starts, escapes = [], [], []
    for k, seed in enumerate(seeds):
        traj = integrate(sys, seed, (0.0, t_end), settings.tol)
        if traj.escaped:
            escapes.append(EscapeRecord(k, traj.t_final, traj.termination.exit_state))
            continue
        clouds.append(traj.at(ts))
        starts.append(traj.at(settings.transient))
    points = np.vstack(clouds) if clouds else np.zeros((0, 3))
    radius = float(np.linalg.norm(points, axis=1).max()) if len(points) else math.inf
    return AttractorSample(float(b), points, not escapes, radius, sys, np.array(starts).reshape(-1, 3),
                           tuple(escapes), settings)


def cross_section(sample: AttractorSample, plane: PlaneEvent | None = None) -> np.ndarray:
    """In-plane coordinates of the sampled trajectories' plane crossings.

    For the plane x = 0 the columns are (y, z); for other planes they are
    coordinates along an orthonormal in-plane basis.
    """
    if not sample.bounded or len(sample.starts) == 0:
        raise PreconditionError("cross section needs a bounded, nonempty sample")
    plane = plane or PlaneEvent.coordinate(0, 0.0)
    n = np.asarray(plane.normal)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    if np.allclose(np.abs(n), [1.0, 0.0, 0.0]):
        e1, e2 = np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])
    else:
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
    pts = []
    for s in sample.starts:
        for c in crossings(sample.system, s, plane, (0.0, sample.settings.sample_time), sample.settings.tol):
            pts.append([c.state @ e1, c.state @ e2])
    return np.array(pts).reshape(-1, 2)


def cloud_hausdorff(sample: AttractorSample) -> float:
    """Hausdorff distance between the cloud and its symmetry image."""
    image = sample.points @ symmetry_matrix(sample.system).T
    tree = sample.tree()
    d1 = tree.query(image)[0].max()
    d2 = cKDTree(image).query(sample.points)[0].max()
    return float(max(d1, d2))


# -- faintness ----------------------------------------------------------------

class FaintVerdict(str, enum.Enum):
    FAINT = "faint"
    ATTRACTING = "attracting"
    NO_VISIT = "no_visit"


@dataclass(frozen=True)
class FaintnessResult:
    verdict: FaintVerdict
    dwell: float
    escaped: bool
    escape_time: float | None
    exit_state: np.ndarray | None

    def summary(self) -> dict:
        return {"verdict": self.verdict.value, "dwell": self.dwell, "escaped": self.escaped,
                "escape_time": self.escape_time,
                "exit_state": None if self.exit_state is None else [float(v) for v in self.exit_state]}


def measure_dwell(sys: SystemDef, s0, cloud: AttractorSample, settings: AtlasSettings | None = None,
                  max_time: float | None = None) -> FaintnessResult:
    """Time a trajectory spends within ``delta_visit`` of the cloud, and its fate."""
    settings = settings or cloud.settings
    horizon = settings.faint_max_time if max_time is None else max_time
    tol = replace(settings.tol, max_time=horizon)
    traj = integrate(sys, s0, (0.0, horizon), tol)
    return _verdict(traj, cloud, settings)


def _verdict(traj, cloud, settings) -> FaintnessResult:
    dwell = 0.0
    if len(cloud.points):
        tree = cloud.tree()
        dt = settings.dwell_dt
        t0, t1 = traj.times[0], traj.times[-1]
        chunk = 20000
        for start in np.arange(t0, t1, chunk * dt):
            ts = np.arange(start, min(t1, start + chunk * dt), dt)
            d, _ = tree.query(traj.at(ts), distance_upper_bound=settings.delta_visit)
            dwell += float(np.count_nonzero(np.isfinite(d))) * dt
    if not traj.escaped:
        return FaintnessResult(FaintVerdict.ATTRACTING, dwell, False, None, None)
    verdict = FaintVerdict.FAINT if dwell > settings.t_visit_min else FaintVerdict.NO_VISIT
    return FaintnessResult(verdict, dwell, True, traj.t_final, traj.termination.exit_state)


def faintness_test(b: float, settings: AtlasSettings | None = None,
                   sample: AttractorSample | None = None) -> FaintnessResult:
    """Dwell of p1's inner unstable branch near the cloud before it escapes."""
    settings = settings or AtlasSettings()
    sample = sample or sample_attractor_class(b, settings)
    p1 = equilibria(sample.system)[1]
    if p1.kind is not Kind.SADDLE_FOCUS_2:
        raise PreconditionError(f"{p1.name} is {p1.kind.value}, not a saddle-focus with a 1D unstable manifold")
    tol = replace(settings.tol, max_time=settings.faint_max_time)
    branch = trace_1d(p1, Stability.UNSTABLE, inner_branch_tag(p1), tol=tol,
                      max_time=settings.faint_max_time)
    return _verdict(branch.trajectory, sample, settings)


# -- orbits -------------------------------------------------------------------

def find_orbit(sys: SystemDef, settings: AtlasSettings | None = None) -> tuple[ClosedOrbit | None, list]:
    """First verified, annotated orbit from the symmetric seed set.

    Returns ``(orbit or None, attempts)`` where ``attempts`` records each
    seed's outcome.
    """
    settings = settings or AtlasSettings()
    attempts = []
    ref = None
    for seed in settings.seeds():
        try:
            orbit = detect_closed_orbit(sys, seed, settings.orbit, settings.tol)
            ref = ref or reference_curve(sys, settings.tol)
            orbit = annotate(orbit, ref)
        except (NotFoundError, AmbiguousWindingError) as exc:
            attempts.append({"seed": list(seed), "error": str(exc)})
            continue
        attempts.append({"seed": list(seed), "period": orbit.period})
        return orbit, attempts
    return None, attempts


# -- classification -----------------------------------------------------------

class Verdict(str, enum.Enum):
    UNBOUNDED = "Unbounded"
    FAINT_ATTRACTOR = "FaintAttractor"
    COMPLEX_ATTRACTOR = "ComplexAttractor"
    CLOSED_ORBITS = "ClosedOrbits"
    SMALL_CYCLE_NEAR_HOPF = "SmallCycleNearHopf"
    STABLE_EQUILIBRIUM = "StableEquilibrium"


class Arrangement(str, enum.Enum):
    SINGLE = "Single"
    TWIN = "Twin"


@dataclass(frozen=True, eq=False)
class Classification:
    b: float
    verdict: Verdict
    rotation: int | None = None
    arrangement: Arrangement | None = None
    orbit: ClosedOrbit | None = None
    evidence: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "b": self.b,
            "verdict": self.verdict.value,
            "rotation": self.rotation,
            "arrangement": self.arrangement.value if self.arrangement else None,
            "orbit": self.orbit.summary() if self.orbit else None,
            "evidence": self.evidence,
        }


def _escape_summary(sample: AttractorSample) -> list:
    return [{"seed_index": e.seed_index, "time": e.time, "state": [float(v) for v in e.state]}
            for e in sample.escapes]


def classify_parameter(b: float, settings: AtlasSettings | None = None) -> Classification:
    """Regime verdict at damping ``b``.

    Procedure: stable origin gives StableEquilibrium; an unbounded sample
    gives Unbounded; a bounded sample whose p1 branch only visits the cloud
    and leaves gives FaintAttractor; otherwise a verified orbit gives
    ClosedOrbits (or SmallCycleNearHopf when its amplitude about the origin
    is below ``hopf_amplitude``) and no orbit gives ComplexAttractor.
    """
    settings = settings or AtlasSettings()
    sys = settings.system(b)
    p0 = equilibria(sys)[0]
    if p0.kind is Kind.STABLE_FOCUS_NODE:
        return Classification(b, Verdict.STABLE_EQUILIBRIUM, evidence={"p0_kind": p0.kind.value})
    sample = sample_attractor_class(b, settings, sys)
    evidence = {"bounded": sample.bounded, "bounding_radius": sample.bounding_radius,
                "n_points": int(len(sample.points))}
    faint = None
    try:
        faint = faintness_test(b, settings, sample)
        evidence["faintness"] = faint.summary()
    except PreconditionError as exc:
        evidence["faintness"] = {"skipped": str(exc)}
    if not sample.bounded:
        evidence["escapes"] = _escape_summary(sample)
        return Classification(b, Verdict.UNBOUNDED, evidence=evidence)
    if faint is not None and faint.verdict is FaintVerdict.FAINT:
        return Classification(b, Verdict.FAINT_ATTRACTOR, evidence=evidence)
    orbit, attempts = find_orbit(sys, settings)
    evidence["orbit_attempts"] = attempts
    if orbit is None:
        return Classification(b, Verdict.COMPLEX_ATTRACTOR, evidence=evidence)
    arrangement = Arrangement.SINGLE if orbit.symmetry is Symmetry.SELF_SYMMETRIC else Arrangement.TWIN
    amplitude = float(np.linalg.norm(orbit.samples - p0.location, axis=1).max())
    evidence["amplitude"] = amplitude
    verdict = Verdict.SMALL_CYCLE_NEAR_HOPF if amplitude < settings.hopf_amplitude else Verdict.CLOSED_ORBITS
    return Classification(b, verdict, orbit.rotation_number, arrangement, orbit, evidence)


@dataclass(frozen=True)
class ScanRow:
    b: float
    classification: Classification | None
    error: str | None = None


def _classify_row(args) -> ScanRow:
    b, settings = args
    try:
        return ScanRow(b, classify_parameter(b, settings))
    except Cubic3dError as exc:
        return ScanRow(b, None, f"{type(exc).__name__}: {exc}")


def scan(b_values: Sequence[float], settings: AtlasSettings | None = None, jobs: int = 1) -> list[ScanRow]:
    """Classify each b independently; rows come back in input order."""
    settings = settings or AtlasSettings()
    b_values = [float(b) for b in b_values]
    if not b_values:
        raise PreconditionError("scan needs at least one parameter value")
    work = [(b, settings) for b in b_values]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(min(jobs, len(work))) as pool:
            return list(pool.map(_classify_row, work))
    return [_classify_row(w) for w in work]


# -- bisection ----------------------------------------------------------------

class BifurcationKind(str, enum.Enum):
    ROTATION_NUMBER_CHANGE = "RotationNumberChange"
    HOMOCLINIC_FATE_FLIP = "HomoclinicFateFlip"
    TWIN_MERGE = "TwinMerge"
    HOPF = "Hopf"


@dataclass(frozen=True)
class BifurcationResult:
    kind: BifurcationKind
    bracket: tuple[float, float]
    resolved: float
    values: tuple            # predicate values at (b_lo, b_hi)
    steps: tuple = ()        # (b, value) for every evaluated midpoint
    anomalies: tuple = ()    # midpoints whose value matched neither endpoint

    def summary(self) -> dict:
        return {
            "kind": self.kind.value,
            "bracket": list(self.bracket),
            "resolved": self.resolved,
            "values": [_jsonable(v) for v in self.values],
            "steps": [[b, _jsonable(v)] for b, v in self.steps],
            "anomalies": [[b, _jsonable(v)] for b, v in self.anomalies],
        }


def _jsonable(v):
    return v.value if isinstance(v, enum.Enum) else v


def _bisect(kind: BifurcationKind, predicate: Callable[[float], object], b_lo: float, b_hi: float,
            resolution: float) -> BifurcationResult:
    if not b_lo < b_hi or resolution <= 0:
        raise PreconditionError("need b_lo < b_hi and a positive resolution")
    v_lo, v_hi = predicate(b_lo), predicate(b_hi)
    if v_lo == v_hi:
        raise NoBracketError(f"predicate is {_jsonable(v_lo)!r} at both ends of [{b_lo}, {b_hi}]")
    lo, hi = b_lo, b_hi
    steps, anomalies = [], []
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        v = predicate(mid)
        steps.append((mid, v))
        if v == v_hi:
            hi = mid
        else:
            if v != v_lo:
                anomalies.append((mid, v))
            lo = mid
    return BifurcationResult(kind, (lo, hi), 0.5 * (lo + hi), (v_lo, v_hi), tuple(steps), tuple(anomalies))


def _orbit_property(settings: AtlasSettings, what: str):
    def predicate(b):
        orbit, _ = find_orbit(settings.system(b), settings)
        if orbit is None:
            return None
        return orbit.rotation_number if what == "rotation" else (
            Arrangement.SINGLE if orbit.symmetry is Symmetry.SELF_SYMMETRIC else Arrangement.TWIN)
    return predicate


def bisect_rotation(b_lo: float = 0.318, b_hi: float = 0.32, resolution: float = 2e-4,
                    settings: AtlasSettings | None = None) -> BifurcationResult:
    """Locate a change of the attracting orbit's rotation number."""
    settings = settings or AtlasSettings()
    return _bisect(BifurcationKind.ROTATION_NUMBER_CHANGE, _orbit_property(settings, "rotation"),
                   b_lo, b_hi, resolution)


def branch_fate_at(b: float, settings: AtlasSettings | None = None) -> FateKind:
    settings = settings or AtlasSettings()
    p1 = equilibria(settings.system(b))[1]
    branch = trace_1d(p1, Stability.UNSTABLE, inner_branch_tag(p1), tol=settings.tol,
                      max_time=settings.fate_max_time, store="final")
    return branch.fate.kind


def bisect_branch_fate(b_lo: float = 0.202, b_hi: float = 0.3, resolution: float = 1e-3,
                       settings: AtlasSettings | None = None) -> BifurcationResult:
    """Bracket the homoclinic parameter where p1's inner branch switches escape side."""
    settings = settings or AtlasSettings()
    return _bisect(BifurcationKind.HOMOCLINIC_FATE_FLIP, lambda b: branch_fate_at(b, settings),
                   b_lo, b_hi, resolution)


def bisect_twin_merge(b_lo: float = 0.4, b_hi: float = 0.5, resolution: float = 1e-3,
                      settings: AtlasSettings | None = None) -> BifurcationResult:
    """Locate where the twin orbits merge into one self-symmetric orbit."""
    settings = settings or AtlasSettings()
    return _bisect(BifurcationKind.TWIN_MERGE, _orbit_property(settings, "arrangement"), b_lo, b_hi, resolution)
