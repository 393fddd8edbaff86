"""Invariant manifolds of the equilibria, traced as seeded trajectories.

One-dimensional manifolds are single trajectories seeded a small offset
along the real eigenvector; two-dimensional manifolds are fans of
trajectories seeded on a small circle in the real eigen-plane of the complex
pair.  Stable manifolds are integrated in backward time.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import StructureMismatchError, UndecidedError
from .integrator import Tolerances, Trajectory, integrate
from .spectral import Equilibrium, equilibria
from .systems import eval_field

__all__ = [
    "Stability",
    "FateKind",
    "Fate",
    "ManifoldBranch",
    "Rotation",
    "trace_1d",
    "expand_2d",
    "inner_branch_tag",
    "fate_of",
    "branch_fate",
    "rotation_direction",
]

CAPTURE_RADIUS = 1e-6


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


class FateKind(str, enum.Enum):
    ESCAPES_POSITIVE_X = "escapes_positive_x"
    ESCAPES_NEGATIVE_X = "escapes_negative_x"
    CONVERGES_TO_EQUILIBRIUM = "converges_to_equilibrium"
    CONVERGES_TO_BOUNDED_SET = "converges_to_bounded_set"
    UNDECIDED = "undecided"

    @property
    def escapes(self) -> bool:
        return self in (FateKind.ESCAPES_POSITIVE_X, FateKind.ESCAPES_NEGATIVE_X)


@dataclass(frozen=True)
class Fate:
    kind: FateKind
    equilibrium: str | None = None
    dwell_time_near_attractor: float = 0.0
    exit_state: np.ndarray | None = None
    exit_time: float | None = None


@dataclass(frozen=True, eq=False)
class ManifoldBranch:
    equilibrium: str
    stability: Stability
    dim: int
    branch_tag: int | None
    seed_angle: float | None
    seed: np.ndarray
    trajectory: Trajectory
    fate: Fate

    @property
    def backward(self) -> bool:
        """Stable branches are stored in backward-time order."""
        return self.stability is Stability.STABLE

    @property
    def polyline(self) -> np.ndarray:
        return self.trajectory.states[:, :3]


def _targets(eq: Equilibrium) -> tuple[np.ndarray, list[str]]:
    others = [e for e in equilibria(eq.system) if e.name != eq.name]
    return np.array([e.location for e in others]).reshape(-1, 3), [e.name for e in others]


def fate_of(traj: Trajectory, target_names=()) -> Fate:
    """Fate of a seeded trajectory from its termination record."""
    term = traj.termination
    if term.escaped:
        x = float(term.exit_state[0])
        if x == 0.0:
            return Fate(FateKind.UNDECIDED, exit_state=term.exit_state, exit_time=traj.t_final)
        kind = FateKind.ESCAPES_POSITIVE_X if x > 0 else FateKind.ESCAPES_NEGATIVE_X
        return Fate(kind, exit_state=term.exit_state, exit_time=traj.t_final)
    if term.kind.value == "converged":
        name = target_names[term.target] if term.target is not None and target_names else None
        return Fate(FateKind.CONVERGES_TO_EQUILIBRIUM, equilibrium=name)
    return Fate(FateKind.CONVERGES_TO_BOUNDED_SET)


def _check_1d(eq: Equilibrium, stability: Stability) -> tuple[float, np.ndarray]:
    sign = -1 if stability is Stability.STABLE else 1
    try:
        lam, v = eq.real_eigen(sign)
    except LookupError:
        raise StructureMismatchError(f"{eq.name} has no real {stability.value} eigenvalue") from None
    n_same = sum(1 for z in eq.eigenvalues if np.sign(z.real) == sign)
    if n_same != 1:
        raise StructureMismatchError(f"{eq.name}: {stability.value} manifold is {n_same}-dimensional, not 1")
    return lam, v


def inner_branch_tag(eq: Equilibrium, stability: Stability = Stability.UNSTABLE) -> int:
    """Sign of the 1D branch whose seed points toward the origin.

    For p1/p2 this is the branch written with subscript 1 ("goes first
    towards the region near the origin").
    """
    _, v = _check_1d(eq, stability)
    d = -eq.location
    if np.linalg.norm(d) == 0.0:
        return 1
    return 1 if v @ d > 0 else -1


def trace_1d(eq: Equilibrium, stability: Stability | str = Stability.UNSTABLE, branch_tag: int = 1,
             seed_offset: float = 1e-6, tol: Tolerances | None = None,
             max_time: float | None = None, store: str = "dense") -> ManifoldBranch:
    """Trace one branch of a 1D manifold from ``location +- seed_offset * v``."""
    stability = Stability(stability)
    tol = tol or Tolerances()
    if branch_tag not in (1, -1):
        raise ValueError("branch_tag must be +1 or -1")
    _, v = _check_1d(eq, stability)
    seed = eq.location + branch_tag * seed_offset * v
    horizon = tol.max_time if max_time is None else max_time
    t1 = -horizon if stability is Stability.STABLE else horizon
    targets, names = _targets(eq)
    traj = integrate(eq.system, seed, (0.0, t1), tol, store=store, targets=targets, capture=CAPTURE_RADIUS)
    return ManifoldBranch(eq.name, stability, 1, branch_tag, None, seed, traj, fate_of(traj, names))


def branch_fate(eq: Equilibrium, branch_tag: int | None = None, stability: Stability | str = Stability.UNSTABLE,
                seed_offset: float = 1e-6, tol: Tolerances | None = None, max_time: float | None = None) -> Fate:
    """Fate of one 1D branch; defaults to the inner (toward-origin) branch."""
    stability = Stability(stability)
    tag = inner_branch_tag(eq, stability) if branch_tag is None else branch_tag
    return trace_1d(eq, stability, tag, seed_offset, tol, max_time, store="final").fate


def eigen_plane(eq: Equilibrium) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the real plane spanned by the complex eigenvector."""
    _, w = eq.complex_pair()
    u1 = w.real / np.linalg.norm(w.real)
    u2 = w.imag - (w.imag @ u1) * u1
    u2 = u2 / np.linalg.norm(u2)
    return u1, u2


def _check_2d(eq: Equilibrium, stability: Stability):
    try:
        lam, _ = eq.complex_pair()
    except LookupError:
        raise StructureMismatchError(f"{eq.name} has no complex eigenvalue pair") from None
    want = -1 if stability is Stability.STABLE else 1
    if np.sign(lam.real) != want:
        raise StructureMismatchError(f"{eq.name}: complex pair is not {stability.value}")
    return lam


def ring_seeds(eq: Equilibrium, n: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """``n`` seeds evenly spaced on a circle in the eigen-plane.

    For even ``n`` the second half is the exact point reflection of the
    first, so seeds at the origin pair up bit-for-bit under the odd symmetry.
    """
    u1, u2 = eigen_plane(eq)
    angles = 2.0 * np.pi * np.arange(n) / n
    offsets = radius * (np.cos(angles)[:, None] * u1 + np.sin(angles)[:, None] * u2)
    if n % 2 == 0:
        offsets[n // 2:] = -offsets[:n // 2]
    return angles, eq.location + offsets


def expand_2d(eq: Equilibrium, stability: Stability | str = Stability.UNSTABLE, ring_count: int = 8,
              ring_radius: float = 1e-4, tol: Tolerances | None = None, max_time: float | None = None,
              store: str = "dense", jobs: int = 1) -> list[ManifoldBranch]:
    """Fan of ``ring_count`` trajectories approximating a 2D manifold."""
    stability = Stability(stability)
    tol = tol or Tolerances()
    _check_2d(eq, stability)
    angles, seeds = ring_seeds(eq, ring_count, ring_radius)
    horizon = tol.max_time if max_time is None else max_time
    t1 = -horizon if stability is Stability.STABLE else horizon
    targets, names = _targets(eq)

    def one(k):
        traj = integrate(eq.system, seeds[k], (0.0, t1), tol, store=store, targets=targets, capture=CAPTURE_RADIUS)
        return ManifoldBranch(eq.name, stability, 2, None, float(angles[k]), seeds[k], traj, fate_of(traj, names))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, range(ring_count)))
    return [one(k) for k in range(ring_count)]


class Rotation(str, enum.Enum):
    POSITIVE_ANGULAR = "positive_angular"
    NEGATIVE_ANGULAR = "negative_angular"


def rotation_direction(eq: Equilibrium, tol: Tolerances | None = None, radius: float = 1e-4,
                       turns: float = 2.0, n_samples: int = 400) -> Rotation:
    """Sense of rotation of the spiral 2D manifold about the x-axis direction.

    Samples a short trajectory seeded on the eigen-plane (forward for an
    unstable pair, backward for a stable one) and evaluates the angular rate
    of (y, z) about the equilibrium, ``dy*dz' - dz*dy'``, with velocities of
    the forward-time field.  The sign must not change along the arc.
    """
    tol = tol or Tolerances()
    lam, _ = eq.complex_pair()
    stability = Stability.UNSTABLE if lam.real > 0 else Stability.STABLE
    _, seeds = ring_seeds(eq, 1, radius)
    duration = turns * 2.0 * math.pi / abs(lam.imag)
    t1 = duration if stability is Stability.UNSTABLE else -duration
    traj = integrate(eq.system, seeds[0], (0.0, t1), tol)
    ts = np.linspace(0.0, t1, n_samples)
    pts = traj.at(ts)
    rates = []
    for p in pts:
        f = eval_field(eq.system, p)
        dy, dz = p[1] - eq.location[1], p[2] - eq.location[2]
        rates.append(dy * f[2] - dz * f[1])
    rates = np.array(rates)
    if np.all(rates > 0):
        return Rotation.POSITIVE_ANGULAR
    if np.all(rates < 0):
        return Rotation.NEGATIVE_ANGULAR
    raise UndecidedError(f"{eq.name}: angular rate changes sign along the sampled arc")
