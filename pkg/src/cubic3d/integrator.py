"""Adaptive Dormand-Prince 5(4) integration with dense output and plane events.

The stepping loop lives in :mod:`cubic3d._kernel` (compiled when available);
this module wraps it in value types and adds event localization, the
variational flow, and CSV export.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernel
from .errors import IntegrationError
from .systems import SystemDef, as_state

__all__ = [
    "Tolerances",
    "TerminationKind",
    "Termination",
    "Trajectory",
    "PlaneEvent",
    "Crossing",
    "Monodromy",
    "integrate",
    "advance",
    "crossings",
    "flow_with_monodromy",
    "flow_map",
]

_STATUS_MESSAGES = {
    2: "step size underflow",
    3: "step budget exhausted",
    4: "non-finite state",
}


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = 1.0
    min_step: float = 1e-12
    escape_radius: float = 10.0
    max_time: float = 2000.0
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if not 0 < self.min_step < self.max_step:
            raise ValueError("need 0 < min_step < max_step")
        if not self.escape_radius > 0:
            raise ValueError("escape_radius must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")

    def scaled(self, factor: float) -> "Tolerances":
        """Tolerances with abs/rel tightened (factor < 1) or loosened."""
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)


class TerminationKind(str, enum.Enum):
    TIME_LIMIT = "time_limit"
    ESCAPED = "escaped"
    EVENT = "event"
    CONVERGED = "converged"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    radius: float | None = None
    exit_state: np.ndarray | None = None
    event_id: int | None = None
    target: int | None = None

    @property
    def escaped(self) -> bool:
        return self.kind is TerminationKind.ESCAPED


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of one integration plus optional dense coefficients.

    ``dense[i]`` holds the five coefficient rows of the continuous extension
    on ``[times[i], times[i+1]]``; evaluate through :meth:`at`.
    """

    times: np.ndarray
    states: np.ndarray
    termination: Termination
    dense: np.ndarray | None = None
    error_estimate: float = 0.0
    n_steps: int = 0
    n_rejected: int = 0
    n_fev: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1, :3].copy()

    @property
    def escaped(self) -> bool:
        return self.termination.escaped

    def step_index(self, t):
        """Index i of the step whose closed interval contains ``t``."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        t = np.asarray(t, dtype=float)
        forward = self.times[-1] > self.times[0]
        lo, hi = (self.times[0], self.times[-1]) if forward else (self.times[-1], self.times[0])
        if np.any(t < lo - 1e-12 * max(1.0, abs(lo))) or np.any(t > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError(f"time outside the integrated span [{lo}, {hi}]")
        if forward:
            idx = np.searchsorted(self.times, t, side="right") - 1
        else:
            idx = len(self.times) - 1 - np.searchsorted(self.times[::-1], t, side="left")
        return np.clip(idx, 0, len(self.times) - 2)

    def at(self, t) -> np.ndarray:
        """Dense-output state(s) at time(s) ``t``."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self.step_index(t)
        h = self.times[idx + 1] - self.times[idx]
        theta = ((t - self.times[idx]) / h)[:, None]
        theta1 = 1.0 - theta
        rc = self.dense[idx]
        out = rc[:, 0] + theta * (rc[:, 1] + theta1 * (rc[:, 2] + theta * (rc[:, 3] + theta1 * rc[:, 4])))
        out = out[:, :3]
        return out[0] if scalar else out

    def __call__(self, t):
        return self.at(t)


@dataclass(frozen=True)
class PlaneEvent:
    """The plane ``normal . s = offset``; normal is normalized on construction."""

    normal: tuple
    offset: float = 0.0
    direction: int = 0  # +1 upward, -1 downward, 0 both

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(n))
        if n.shape != (3,) or not norm > 0:
            raise ValueError("plane normal must be a nonzero 3-vector")
        object.__setattr__(self, "normal", tuple(n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")

    @classmethod
    def coordinate(cls, axis: int | str, value: float = 0.0, direction: int = 0) -> "PlaneEvent":
        if isinstance(axis, str):
            axis = "xyz".index(axis)
        n = [0.0, 0.0, 0.0]
        n[axis] = 1.0
        return cls(tuple(n), value, direction)

    def value(self, s) -> np.ndarray:
        return np.asarray(s)[..., :3] @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class Crossing:
    time: float
    state: np.ndarray
    direction: int


@dataclass(frozen=True)
class Monodromy:
    final_state: np.ndarray
    matrix: np.ndarray
    time: float = 0.0


def _run(sys, y0, t0, t1, tol, mode, targets=None, capture=0.0):
    if targets is None:
        targets = np.zeros((0, 3))
    return _kernel.dopri5(
        sys.kernel_code,
        np.asarray(sys.kernel_params, dtype=float),
        np.ascontiguousarray(y0, dtype=float),
        float(t0),
        float(t1),
        tol.rel_tol,
        tol.abs_tol,
        tol.max_step,
        tol.min_step,
        tol.escape_radius,
        int(tol.max_steps),
        mode,
        np.ascontiguousarray(targets, dtype=float).reshape(-1, 3),
        float(capture),
    )


_MODES = {"final": 0, "steps": 1, "dense": 2}


def integrate(sys: SystemDef, s0, t_span: Sequence[float], tol: Tolerances | None = None,
              *, store: str = "dense", targets=None, capture: float = 0.0) -> Trajectory:
    """Integrate ``sys`` from ``s0`` over ``t_span`` (``t1 < t0`` runs backward).

    Stops early when the state norm reaches ``tol.escape_radius`` (termination
    ``ESCAPED``) or comes within ``capture`` of one of ``targets``
    (``CONVERGED``).  ``store`` selects what is kept: ``"dense"`` (every step
    plus interpolation coefficients), ``"steps"`` or ``"final"``.

    Raises :class:`IntegrationError` on step-size underflow or an exhausted
    step budget, except when the failure happens outside the escape radius,
    which is reported as an escape.
    """
    tol = tol or Tolerances()
    s0 = as_state(s0)
    t0, t1 = map(float, t_span)
    if t0 == t1:
        raise ValueError("t_span must have t0 != t1")
    status, t_end, y_end, times, states, dense, info = _run(
        sys, s0, t0, t1, tol, _MODES[store], targets, capture)
    n_acc, n_rej, n_fev, err_accum, hit = info
    if status in (2, 3, 4):
        last_t, last_s = float(times[-1]), states[-1].copy()
        if status != 3 and np.all(np.isfinite(last_s)) and np.linalg.norm(last_s) >= tol.escape_radius:
            status = 1
        else:
            raise IntegrationError(_STATUS_MESSAGES[status], last_t, last_s, status)
    if status == 1:
        term = Termination(TerminationKind.ESCAPED, radius=tol.escape_radius, exit_state=states[-1].copy())
    elif status == 5:
        term = Termination(TerminationKind.CONVERGED, target=int(hit))
    else:
        term = Termination(TerminationKind.TIME_LIMIT)
    return Trajectory(times, states, term, dense, err_accum, n_acc, n_rej, n_fev)


def advance(sys: SystemDef, s0, duration: float, tol: Tolerances | None = None) -> tuple[float, np.ndarray, bool]:
    """Flow ``s0`` for ``duration`` keeping nothing but the end point.

    Returns ``(t_reached, state, escaped)``.
    """
    if duration == 0:
        return 0.0, as_state(s0), False
    traj = integrate(sys, s0, (0.0, duration), tol, store="final")
    return traj.t_final, traj.final_state, traj.escaped


def flow_map(sys: SystemDef, s0, T: float, tol: Tolerances | None = None) -> np.ndarray:
    if T == 0:
        return as_state(s0).copy()
    return integrate(sys, s0, (0.0, T), tol, store="final").final_state


def _refine_root(traj: Trajectory, plane: PlaneEvent, i: int, g0: float, g1: float) -> float:
    ta, tb = float(traj.times[i]), float(traj.times[i + 1])
    ga, gb = g0, g1
    # bisection on the dense polynomial, then one secant/Newton polish
    for _ in range(60):
        tm = 0.5 * (ta + tb)
        gm = float(plane.value(traj.at(tm)))
        if gm == 0.0:
            return tm
        if (gm > 0) == (ga > 0):
            ta, ga = tm, gm
        else:
            tb, gb = tm, gm
        if abs(tb - ta) <= 1e-15 * max(1.0, abs(tm)):
            break
    t = ta if abs(ga) < abs(gb) else tb
    g = float(plane.value(traj.at(t)))
    eps = 1e-7 * abs(traj.times[i + 1] - traj.times[i])
    lo, hi = min(traj.times[i], traj.times[i + 1]), max(traj.times[i], traj.times[i + 1])
    tp = min(max(t + eps, lo), hi)
    tm_ = min(max(t - eps, lo), hi)
    if tp != tm_:
        dg = (float(plane.value(traj.at(tp))) - float(plane.value(traj.at(tm_)))) / (tp - tm_)
        if dg != 0.0:
            tn = min(max(t - g / dg, lo), hi)
            if abs(float(plane.value(traj.at(tn)))) <= abs(g):
                t = tn
    return t


def plane_crossings(traj: Trajectory, plane: PlaneEvent, t_from: float | None = None) -> list[Crossing]:
    """Refined crossings of ``plane`` by an already integrated dense trajectory."""
    if traj.dense is None:
        raise ValueError("plane crossings need a dense trajectory")
    g = plane.value(traj.states)
    sign_t = 1.0 if traj.times[-1] > traj.times[0] else -1.0
    out = []
    idx = np.nonzero((g[:-1] > 0) != (g[1:] > 0))[0]
    for i in idx:
        # direction of the crossing in forward time
        up = (g[i + 1] > g[i]) == (sign_t > 0)
        d = 1 if up else -1
        if plane.direction and d != plane.direction:
            continue
        if g[i + 1] == 0.0 and i + 2 < len(g) and (g[i + 2] > 0) == (g[i] > 0):
            continue  # tangency at a step node
        t = _refine_root(traj, plane, int(i), float(g[i]), float(g[i + 1]))
        if t_from is not None and sign_t * (t - t_from) < 0:
            continue
        out.append(Crossing(t, traj.at(t), d))
    return out


def crossings(sys: SystemDef, s0, plane: PlaneEvent, t_span: Sequence[float],
              tol: Tolerances | None = None, *, transient: float = 0.0,
              chunk: float = 500.0) -> list[Crossing]:
    """All refined crossings of ``plane`` over ``t_span``, in time order.

    ``s0`` is the state at ``t_span[0] - transient``; the transient leg is
    integrated without storage.  Long spans are processed in chunks so memory
    stays bounded.
    """
    tol = tol or Tolerances()
    t0, t1 = map(float, t_span)
    if t0 == t1:
        raise ValueError("t_span must have t0 != t1")
    direction = 1.0 if t1 > t0 else -1.0
    s = as_state(s0)
    if transient > 0:
        _, s, escaped = advance(sys, s, direction * transient, tol)
        if escaped:
            return []
    t = t0
    out: list[Crossing] = []
    while direction * (t1 - t) > 0:
        t_next = t + direction * min(chunk, abs(t1 - t))
        traj = integrate(sys, s, (t, t_next), tol, store="dense")
        for c in plane_crossings(traj, plane):
            if out and abs(c.time - out[-1].time) < 1e-12:
                continue
            out.append(c)
        if traj.escaped:
            break
        t, s = traj.t_final, traj.final_state
    return out


def flow_with_monodromy(sys: SystemDef, s0, T: float, tol: Tolerances | None = None) -> Monodromy:
    """Time-T flow of ``s0`` together with the solution of dPhi/dt = J Phi, Phi(0) = I."""
    tol = tol or Tolerances()
    s0 = as_state(s0)
    if not math.isfinite(T):
        raise ValueError("T must be finite")
    if T == 0:
        return Monodromy(s0.copy(), np.eye(3), 0.0)
    y0 = np.concatenate([s0, np.eye(3).ravel()])
    status, t_end, y_end, times, states, dense, info = _run(sys, y0, 0.0, T, tol, 0)
    if status != 0:
        if status == 1:
            raise IntegrationError("trajectory escaped during variational flow", t_end, y_end[:3], status)
        raise IntegrationError(_STATUS_MESSAGES.get(status, f"status {status}"), t_end, y_end[:3], status)
    return Monodromy(y_end[:3].copy(), y_end[3:].reshape(3, 3).copy(), float(T))


def write_trajectory_csv(path, traj: Trajectory, *, stride: int = 1, header: Iterable[str] = ()) -> None:
    """CSV ``t,x,y,z`` with 17 significant digits, one row per accepted step."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = np.column_stack([traj.times, traj.states[:, :3]])[::stride]
    _write_csv(path, ["t", "x", "y", "z"], rows, header)


def write_crossings_csv(path, items: Sequence[Crossing], *, header: Iterable[str] = ()) -> None:
    rows = np.array([[c.time, *c.state[:3], c.direction] for c in items]).reshape(-1, 5)
    _write_csv(path, ["t", "x", "y", "z", "direction"], rows, header, int_cols={4})


def _write_csv(path, columns, rows, header, int_cols=frozenset()):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(
                str(int(v)) if j in int_cols else format(float(v), ".17g")
                for j, v in enumerate(row)) + "\n")
