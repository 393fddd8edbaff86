import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cubic3d import _kernel, _pykernel
from cubic3d.errors import IntegrationError, InvalidStateError
from cubic3d.integrator import (PlaneEvent, TerminationKind, Tolerances, crossings, flow_map, flow_with_monodromy,
                                integrate, plane_crossings, write_crossings_csv, write_trajectory_csv)
from cubic3d.systems import cubic2, eval_field, lorenz, silnikov7


def _reference(sys, s0, t1):
    sol = solve_ivp(lambda t, s: eval_field(sys, s), (0, t1), s0, method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:, -1]


@pytest.mark.parametrize("sys,s0,t1", [
    (cubic2(0.32), (1.2, 0.0, -1.5), 20.0),
    (lorenz(), (1.0, 1.0, 1.0), 2.0),
    (silnikov7(-0.65, 0.4), (0.1, 0.0, 0.0), 20.0),
])
def test_matches_independent_integrator(sys, s0, t1):
    # the Lorenz attractor extends well past the default escape radius
    traj = integrate(sys, s0, (0.0, t1), Tolerances(abs_tol=1e-12, rel_tol=1e-12, escape_radius=1e3))
    assert not traj.escaped
    ref = _reference(sys, s0, t1)
    assert np.max(np.abs(traj.final_state - ref)) < 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_equilibrium_is_constant():
    traj = integrate(cubic2(0.3), (0, 0, 0), (0.0, 50.0))
    assert np.all(traj.states == 0.0)
    assert traj.termination.kind is TerminationKind.TIME_LIMIT


def test_escape_before_max_time():
    tol = Tolerances(max_time=200.0, escape_radius=10.0)
    traj = integrate(cubic2(0.312), (1.5, -1.5, 0.0), (0.0, 200.0), tol)
    assert traj.escaped and traj.t_final < 200.0
    assert np.linalg.norm(traj.termination.exit_state) >= 10.0
    assert traj.termination.kind is TerminationKind.ESCAPED


def test_refinement_self_convergence():
    sys, s0 = cubic2(0.32), (1.2, 0.0, -1.5)
    coarse = integrate(sys, s0, (0.0, 50.0), Tolerances(abs_tol=1e-8, rel_tol=1e-8))
    fine = integrate(sys, s0, (0.0, 50.0), Tolerances(abs_tol=5e-9, rel_tol=5e-9))
    diff = np.linalg.norm(fine.final_state - coarse.final_state)
    assert diff < 10 * coarse.error_estimate


def test_trajectory_invariants():
    traj = integrate(cubic2(0.32), (1.2, 0.0, -1.5), (0.0, 30.0))
    assert len(traj.times) == len(traj.states) >= 2
    assert np.all(np.diff(traj.times) > 0) and np.all(np.isfinite(traj.states))
    back = integrate(cubic2(0.32), (1.2, 0.0, -1.5), (0.0, -3.0))
    assert np.all(np.diff(back.times) < 0)


def test_dense_output_interior_accuracy():
    sys, s0 = cubic2(0.32), (1.2, 0.0, -1.5)
    traj = integrate(sys, s0, (0.0, 20.0), Tolerances(abs_tol=1e-12, rel_tol=1e-12))
    for t in (0.37, 3.1415, 11.2, 19.99):
        direct = integrate(sys, s0, (0.0, t), Tolerances(abs_tol=1e-12, rel_tol=1e-12)).final_state
        assert np.max(np.abs(traj.at(t) - direct)) < 1e-8
    assert np.array_equal(traj.at(traj.times[3]), traj.states[3, :3]) or \
        np.allclose(traj.at(traj.times[3]), traj.states[3, :3], atol=1e-15)


def test_time_reversal():
    sys, s0 = cubic2(0.4), np.array([0.3, -0.2, 0.5])
    tol = Tolerances(abs_tol=1e-12, rel_tol=1e-12)
    fwd = integrate(sys, s0, (0.0, 10.0), tol).final_state
    back = integrate(sys, fwd, (10.0, 0.0), tol).final_state
    # backward flow expands volume by exp(bT), so allow a few orders over the step tolerance
    assert np.max(np.abs(back - s0)) < 1e-9


def test_determinism():
    a = integrate(cubic2(0.317), (1.2, 0.0, -1.5), (0.0, 100.0))
    b = integrate(cubic2(0.317), (1.2, 0.0, -1.5), (0.0, 100.0))
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)


def test_invalid_inputs():
    with pytest.raises(InvalidStateError):
        integrate(cubic2(0.3), (np.nan, 0, 0), (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate(cubic2(0.3), (0, 0, 0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Tolerances(abs_tol=0.0)
    with pytest.raises(ValueError):
        Tolerances(min_step=2.0, max_step=1.0)


def test_budget_exhaustion_raises_with_last_state():
    tol = Tolerances(max_steps=10)
    with pytest.raises(IntegrationError) as err:
        integrate(cubic2(0.32), (1.2, 0.0, -1.5), (0.0, 100.0), tol)
    assert np.all(np.isfinite(err.value.last_state)) and err.value.last_time > 0


def test_capture_target_terminates():
    sys = cubic2(0.3)
    traj = integrate(sys, (1e-9, 0, 0), (0.0, 10.0), targets=np.zeros((1, 3)), capture=1e-6)
    assert traj.termination.kind is TerminationKind.CONVERGED and traj.termination.target == 0


# -- plane events -------------------------------------------------------------

def test_plane_event_normalizes():
    p = PlaneEvent((0.0, 3.0, 4.0), 5.0, 1)
    assert np.isclose(np.linalg.norm(p.normal), 1.0) and np.isclose(p.offset, 1.0)
    with pytest.raises(ValueError):
        PlaneEvent((0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        PlaneEvent((1, 0, 0), 0.0, 2)


def test_crossings_refined_and_filtered():
    sys = cubic2(0.32)
    plane = PlaneEvent.coordinate("x", 0.0)
    both = crossings(sys, (1.2, 0.0, -1.5), plane, (0.0, 200.0))
    up = crossings(sys, (1.2, 0.0, -1.5), PlaneEvent.coordinate("x", 0.0, 1), (0.0, 200.0))
    assert len(both) > 10
    assert all(abs(c.state[0]) < 1e-10 for c in both)
    assert all(c.direction == 1 for c in up)
    assert len(up) == sum(c.direction == 1 for c in both)
    # direction agrees with the sign of x' = y at the crossing
    assert all(np.sign(c.state[1]) == c.direction for c in both)


def test_no_crossings_when_confined():
    # z stays positive along the first stretch from this seed on the b = 0 conservative flow near p2
    traj = integrate(cubic2(0.3), (0.0, 0.0, 0.0), (0.0, 5.0))
    assert plane_crossings(traj, PlaneEvent.coordinate("z", 1.0)) == []


def test_crossings_chunking_matches_single_pass():
    sys, plane = cubic2(0.317), PlaneEvent.coordinate("x", 0.0, 1)
    a = crossings(sys, (1.2, 0.0, -1.5), plane, (0.0, 300.0), chunk=37.0)
    b = crossings(sys, (1.2, 0.0, -1.5), plane, (0.0, 300.0), chunk=1000.0)
    assert len(a) == len(b)
    assert np.allclose([c.time for c in a], [c.time for c in b], atol=1e-7)


def test_b099_cycle_crosses_twice_per_period():
    from conftest import orbit_at
    orbit = orbit_at(0.99, (0.5, 0.0, 0.0))
    cs = crossings(cubic2(0.99), orbit.anchor, PlaneEvent.coordinate("x", 0.0), (0.0, 5 * orbit.period),
                   Tolerances(abs_tol=1e-12, rel_tol=1e-12))
    assert len(cs) == 10


# -- monodromy ----------------------------------------------------------------

def test_monodromy_identity_at_zero():
    m = flow_with_monodromy(cubic2(0.3), (0.1, 0.2, 0.3), 0.0)
    assert np.array_equal(m.matrix, np.eye(3))


@pytest.mark.parametrize("b", [0.3, 0.4, 0.7])
def test_liouville(b, rng):
    sys = cubic2(b)
    for _ in range(3):
        s0 = rng.normal(size=3)
        s0 *= 0.3 * rng.uniform() ** (1 / 3) / np.linalg.norm(s0)
        m = flow_with_monodromy(sys, s0, 5.0)
        expected = np.exp(-b * 5.0)
        assert abs(np.linalg.det(m.matrix) - expected) / expected < 1e-6


def test_monodromy_finite_differences():
    sys, s0, T = cubic2(0.32), np.array([1.2, 0.0, -1.5]), 5.0
    tol = Tolerances(abs_tol=1e-13, rel_tol=1e-13)
    m = flow_with_monodromy(sys, s0, T, tol)
    h = 1e-6
    fd = np.column_stack([(flow_map(sys, s0 + h * e, T, tol) - flow_map(sys, s0 - h * e, T, tol)) / (2 * h)
                          for e in np.eye(3)])
    assert np.max(np.abs(fd - m.matrix)) < 1e-4
    assert np.allclose(m.final_state, flow_map(sys, s0, T, tol), atol=1e-12)


def test_monodromy_backward_is_inverse():
    sys, s0 = cubic2(0.4), np.array([0.2, 0.1, -0.3])
    fwd = flow_with_monodromy(sys, s0, 3.0)
    back = flow_with_monodromy(sys, fwd.final_state, -3.0)
    assert np.allclose(back.matrix @ fwd.matrix, np.eye(3), atol=1e-8)


# -- kernels ------------------------------------------------------------------

def _kernel_args(mode=2, t1=50.0, dim=3):
    sys = cubic2(0.317)
    y0 = np.array([1.2, 0.0, -1.5]) if dim == 3 else np.concatenate([[1.2, 0.0, -1.5], np.eye(3).ravel()])
    return (sys.kernel_code, np.asarray(sys.kernel_params, float), y0, 0.0, t1, 1e-10, 1e-10, 1.0, 1e-12,
            10.0, 10**7, mode, np.zeros((0, 3)), 0.0)


@pytest.mark.skipif(_kernel.BACKEND != "cython", reason="compiled kernel not built")
@pytest.mark.parametrize("mode,dim", [(0, 3), (1, 3), (2, 3), (1, 12)])
def test_backends_agree(mode, dim):
    from cubic3d import _ckernel
    args = _kernel_args(mode, 20.0, dim)
    c = _ckernel.dopri5(*args)
    p = _pykernel.dopri5(*args)
    assert c[0] == p[0] and c[1] == p[1]
    # both backends use the same operation order, so results match bitwise
    assert np.array_equal(c[2], p[2])
    if mode:
        assert np.array_equal(c[3], p[3]) and np.array_equal(c[4], p[4])
        if mode == 2:
            assert np.array_equal(c[5], p[5])
    assert c[6] == p[6]


def test_pure_backend_selected_by_environment():
    import subprocess
    import sys
    import os
    code = "import cubic3d._kernel as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "CUBIC3D_PURE": "1"},
                         capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"


# -- export -------------------------------------------------------------------

def test_csv_exports(tmp_path):
    sys = cubic2(0.32)
    traj = integrate(sys, (1.2, 0.0, -1.5), (0.0, 10.0))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj, stride=2, header=["family: cubic2"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# family: cubic2" and lines[1] == "t,x,y,z"
    assert len(lines) - 2 == len(traj.times[::2])
    row = [float(v) for v in lines[3].split(",")]
    assert row[0] == traj.times[2] and row[1:] == list(traj.states[2, :3])
    cs = plane_crossings(traj, PlaneEvent.coordinate("x", 0.0))
    write_crossings_csv(tmp_path / "c.csv", cs)
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "t,x,y,z,direction" and rows[1].split(",")[-1] in ("1", "-1")
    assert b"\r" not in path.read_bytes()
