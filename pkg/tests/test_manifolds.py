import numpy as np
import pytest
from scipy.spatial import cKDTree

from cubic3d.errors import StructureMismatchError
from cubic3d.integrator import Tolerances
from cubic3d.manifolds import (FateKind, Rotation, Stability, branch_fate, expand_2d, inner_branch_tag,
                               rotation_direction, trace_1d)
from cubic3d.spectral import equilibrium
from cubic3d.systems import cubic2, symmetry_matrix


def _dense_arc_from(branch, length, per_step=20):
    """Dense-output samples (several per accepted step) past an initial arc of the given length.

    The last step overshoots the escape radius by a step-dependent amount, so
    samples are clipped to the escape ball.
    """
    t = branch.trajectory.times
    frac = np.linspace(0.0, 1.0, per_step, endpoint=False)
    ts = np.r_[(t[:-1, None] + frac * np.diff(t)[:, None]).ravel(), t[-1]]
    pts = branch.trajectory.at(ts)
    pts = pts[np.linalg.norm(pts, axis=1) <= 10.0]
    s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    return pts[s >= length]


def _to_polyline(points, poly):
    """Distance from each point to an open polyline."""
    _, idx = cKDTree(poly).query(points)
    best = np.full(len(points), np.inf)
    for i0 in (np.maximum(idx - 1, 0), np.minimum(idx, len(poly) - 2)):
        a, ab = poly[i0], poly[i0 + 1] - poly[i0]
        u = np.clip(np.sum((points - a) * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300), 0, 1)
        best = np.minimum(best, np.linalg.norm(points - a - u[:, None] * ab, axis=1))
    return best


def _hausdorff(a, b):
    return max(_to_polyline(a, b).max(), _to_polyline(b, a).max())


def test_stable_branches_of_p0_are_symmetric():
    p0 = equilibrium(cubic2(0.3), "p0")
    plus = trace_1d(p0, Stability.STABLE, 1, max_time=60.0)
    minus = trace_1d(p0, Stability.STABLE, -1, max_time=60.0)
    assert plus.backward and plus.trajectory.times[-1] < 0
    assert np.linalg.norm(plus.polyline[0] - p0.location) <= 1e-6 * (1 + 1e-12)
    n = min(len(plus.polyline), len(minus.polyline))
    assert np.max(np.abs(plus.polyline[:n] @ symmetry_matrix(p0.system).T - minus.polyline[:n])) < 1e-6


def test_unstable_branches_of_p1_map_onto_p2():
    sys = cubic2(0.3)
    p1, p2 = equilibrium(sys, "p1"), equilibrium(sys, "p2")
    for tag in (1, -1):
        b1 = trace_1d(p1, Stability.UNSTABLE, tag, max_time=40.0)
        b2 = trace_1d(p2, Stability.UNSTABLE, inner_branch_tag(p2) * inner_branch_tag(p1) * tag, max_time=40.0)
        n = min(len(b1.polyline), len(b2.polyline))
        image = b1.polyline[:n] @ symmetry_matrix(sys).T
        assert np.max(np.abs(image - b2.polyline[:n])) < 1e-6


@pytest.mark.parametrize("b,kind", [(0.2, FateKind.ESCAPES_NEGATIVE_X), (0.3, FateKind.ESCAPES_POSITIVE_X)])
def test_inner_branch_fate_of_p1(b, kind):
    p1 = equilibrium(cubic2(b), "p1")
    fate = branch_fate(p1)
    assert fate.kind is kind
    assert np.sign(fate.exit_state[0]) == (1 if kind is FateKind.ESCAPES_POSITIVE_X else -1)
    assert np.linalg.norm(fate.exit_state) >= 10.0


def test_inner_branch_points_toward_origin():
    p1 = equilibrium(cubic2(0.3), "p1")
    branch = trace_1d(p1, Stability.UNSTABLE, inner_branch_tag(p1), max_time=1.0)
    assert np.linalg.norm(branch.polyline[-1]) < np.linalg.norm(p1.location)


def test_unstable_fan_of_p0_bounded_at_b0312():
    fan = expand_2d(equilibrium(cubic2(0.312), "p0"), Stability.UNSTABLE, 8, 1e-4, max_time=500.0)
    assert len(fan) == 8
    for br in fan:
        assert not br.trajectory.escaped
        assert np.max(np.linalg.norm(br.polyline, axis=1)) < 10.0
        assert abs(np.linalg.norm(br.seed) - 1e-4) < 1e-12


def test_unstable_fan_of_p0_escapes_at_b03():
    fan = expand_2d(equilibrium(cubic2(0.3), "p0"), "unstable", 8, 1e-4, max_time=2000.0)
    assert any(br.fate.kind.escapes for br in fan)


def test_stable_fan_of_p2_avoids_other_equilibria():
    fan = expand_2d(equilibrium(cubic2(0.3), "p2"), Stability.STABLE, 8, 1e-4, max_time=2000.0)
    for br in fan:
        assert br.fate.kind is not FateKind.CONVERGES_TO_EQUILIBRIUM
        assert br.trajectory.times[-1] < 0


def test_structure_mismatch():
    p0 = equilibrium(cubic2(0.3), "p0")
    with pytest.raises(StructureMismatchError):
        trace_1d(p0, Stability.UNSTABLE)
    with pytest.raises(StructureMismatchError):
        expand_2d(p0, Stability.STABLE)
    with pytest.raises(StructureMismatchError):
        expand_2d(equilibrium(cubic2(0.3), "p1"), Stability.UNSTABLE)


def test_rotation_direction_is_shared():
    for b in (0.3, 0.5):
        sys = cubic2(b)
        senses = {rotation_direction(equilibrium(sys, name)) for name in ("p0", "p1", "p2")}
        assert senses == {Rotation.NEGATIVE_ANGULAR}


@pytest.mark.parametrize("b", [0.2, 0.3])
def test_seed_offset_robustness(b):
    p1 = equilibrium(cubic2(b), "p1")
    tag = inner_branch_tag(p1)
    a = trace_1d(p1, Stability.UNSTABLE, tag, seed_offset=1e-6, tol=Tolerances(abs_tol=1e-12, rel_tol=1e-12))
    h = trace_1d(p1, Stability.UNSTABLE, tag, seed_offset=5e-7, tol=Tolerances(abs_tol=1e-12, rel_tol=1e-12))
    assert a.fate.kind is h.fate.kind
    assert _hausdorff(_dense_arc_from(a, 1.0), _dense_arc_from(h, 1.0)) < 1e-3


def test_escaping_branches_grow_monotonically_in_x():
    for b in (0.2, 0.3):
        sys = cubic2(b)
        for name in ("p1", "p2"):
            for tag in (1, -1):
                br = trace_1d(equilibrium(sys, name), Stability.UNSTABLE, tag)
                if not br.fate.kind.escapes:
                    continue
                pts = br.trajectory.states[:, :3]
                far = pts[np.argmax(np.linalg.norm(pts, axis=1) > 5.0):]
                assert np.all(np.diff(np.abs(far[:, 0])) > 0)
