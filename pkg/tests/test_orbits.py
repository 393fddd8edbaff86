import math

import numpy as np
import pytest

from conftest import orbit_at, ref_curve
from cubic3d.errors import AmbiguousWindingError, EscapedError, NotFoundError
from cubic3d.integrator import Tolerances, flow_map
from cubic3d.orbits import (ClosedOrbit, OrbitSettings, Symmetry, _round, build_orbit, classify_symmetry,
                            detect_closed_orbit, floquet, linking_oracle, lyapunov_spectrum, refine_orbit,
                            rotation_number, symmetric_distance)
from cubic3d.systems import cubic2

FINE = Tolerances(abs_tol=1e-12, rel_tol=1e-12)


@pytest.mark.parametrize("b", [0.32, 0.4, 0.5])
def test_closed_orbit_invariants(b):
    orbit = orbit_at(b)
    assert orbit.period > 0
    assert np.linalg.norm(flow_map(orbit.system, orbit.anchor, orbit.period, FINE) - orbit.anchor) < 1e-8
    assert np.min(np.abs(orbit.floquet - 1.0)) < 1e-5
    prod = np.prod(orbit.floquet).real
    assert abs(prod - math.exp(-b * orbit.period)) < 1e-5 * math.exp(-b * orbit.period)
    assert orbit.rotation_number >= 1
    assert orbit.is_attracting


@pytest.mark.parametrize("b", [0.32, 0.4, 0.5, 0.99])
def test_period_is_minimal(b):
    orbit = orbit_at(b) if b != 0.99 else orbit_at(b, (0.5, 0.0, 0.0))
    for k in (2, 3):
        s = flow_map(orbit.system, orbit.anchor, orbit.period / k, FINE)
        assert np.linalg.norm(s - orbit.anchor) > 1e-6


def test_rotation_numbers_and_oracle():
    expected = {0.32: 3, 0.4: 1, 0.5: 1}
    for b, rot in expected.items():
        orbit = orbit_at(b)
        assert orbit.rotation_number == rot
        assert linking_oracle(orbit, ref_curve(b)) == rot


def test_symmetry_types():
    assert orbit_at(0.5).symmetry is Symmetry.SELF_SYMMETRIC
    assert orbit_at(0.4).symmetry is Symmetry.TWIN
    assert orbit_at(0.32).symmetry is Symmetry.TWIN
    kind, partner = classify_symmetry(orbit_at(0.4))
    assert kind is Symmetry.TWIN and np.allclose(partner.anchor, -orbit_at(0.4).anchor)
    assert symmetric_distance(orbit_at(0.5)) < 1e-5


@pytest.mark.parametrize("b", [0.32, 0.4])
def test_symmetry_covariance(b):
    orbit = orbit_at(b)
    image = orbit.image()
    anchor, period, res, _ = refine_orbit(orbit.system, image.anchor, image.period)
    assert abs(period - orbit.period) < 1e-8 and res < 1e-8
    assert rotation_number(image, ref_curve(b)) == orbit.rotation_number
    mult = floquet(image)
    assert np.allclose(np.sort_complex(mult), np.sort_complex(orbit.floquet), atol=1e-6)


def test_twin_partner_found_from_mirrored_seed():
    orbit = orbit_at(0.4)
    mirrored = orbit_at(0.4, (-1.2, 0.0, 1.5))
    assert abs(mirrored.period - orbit.period) < 1e-7
    assert np.min(np.linalg.norm(mirrored.samples - (-orbit.anchor), axis=1)) < 1e-3


def test_refinement_from_perturbed_anchor():
    orbit = orbit_at(0.5)
    anchor, period, res, iters = refine_orbit(orbit.system, orbit.anchor + 1e-4, orbit.period * 1.001)
    assert abs(period - orbit.period) < 1e-8 and res < 1e-8 and iters >= 1


def test_attracting_cycle_multipliers_inside_unit_circle():
    mult = orbit_at(0.5).nontrivial_multipliers
    assert len(mult) == 2 and np.all(np.abs(mult) < 1.0)


def test_build_orbit_samples_one_period():
    orbit = orbit_at(0.5)
    rebuilt = build_orbit(orbit.system, orbit.anchor, orbit.period)
    assert len(rebuilt.samples) >= OrbitSettings().min_samples
    assert np.array_equal(rebuilt.samples[0], orbit.anchor)
    assert np.allclose(rebuilt.floquet, orbit.floquet, atol=1e-8)
    assert isinstance(rebuilt, ClosedOrbit) and rebuilt.rotation_number is None


def test_not_found_when_trajectory_escapes():
    with pytest.raises(NotFoundError):
        detect_closed_orbit(cubic2(0.3), (1.5, -1.5, 0.0))


def test_ambiguous_winding_rejected():
    assert _round(2.97, "w") == 3
    with pytest.raises(AmbiguousWindingError):
        _round(2.9, "w")


def test_lyapunov_limit_cycle_matches_floquet():
    sys = cubic2(0.7)
    spec = lyapunov_spectrum(sys, (0.0, 0.0, 0.1), T_total=2000.0)
    assert abs(spec.exponents[0]) < 0.02
    assert abs(np.sum(spec.exponents) + 0.7) < 0.01
    assert np.all(np.diff(spec.exponents) <= 0)
    # independent route: log moduli of the cycle's Floquet multipliers over its period
    orbit = detect_closed_orbit(sys, (0.0, 0.0, 0.1))
    rates = np.sort(np.log(np.abs(orbit.floquet)) / orbit.period)[::-1]
    assert np.allclose(spec.exponents, rates, atol=0.02)
    hist = spec.convergence_history
    assert hist.shape[1] == 4 and np.all(np.diff(hist[:, 0]) > 0)


def test_lyapunov_escape_raises():
    with pytest.raises(EscapedError):
        lyapunov_spectrum(cubic2(0.312), (1.5, -1.5, 0.0), T_total=100.0, transient=0.0)
