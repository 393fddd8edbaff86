"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Criteria whose stated runtime is a hard bound compute from scratch and
assert it; the rest reuse the session caches in ``conftest``.
"""

import math
import time

import numpy as np
import pytest

from conftest import attractor_sample, classification, orbit_at, ref_curve
from cubic3d.atlas import (Arrangement, AtlasSettings, BifurcationKind, FaintVerdict, Verdict, bisect_branch_fate,
                           bisect_rotation, bisect_twin_merge, branch_fate_at, classify_parameter, cross_section,
                           find_orbit, measure_dwell, sample_attractor_class)
from cubic3d.errors import Cubic3dError
from cubic3d.integrator import flow_with_monodromy
from cubic3d.orbits import (Symmetry, annotate, detect_closed_orbit, linking_oracle,
                            lyapunov_spectrum, refine_orbit, rotation_number)
from cubic3d.spectral import Kind, eigen3, equilibria, hopf_locus
from cubic3d.systems import (cubic2, cubic2prime, divergence, eval_field, eval_jacobian, lorenz, silnikov7,
                             symmetry_image, symmetry_matrix)

pytestmark = pytest.mark.slow

REGIME_B = (0.3, 0.312, 0.317, 0.33, 0.34, 0.4, 0.5, 0.7, 0.99)


def test_criterion_01_equilibrium_structure(criterion):
    with criterion(1, "equilibrium structure at b=0.3") as c:
        t0 = time.perf_counter()
        p0, p1, p2 = equilibria(cubic2(0.3))
        elapsed = time.perf_counter() - t0
        c.note(f"kinds {p0.kind.value} / {p1.kind.value} / {p2.kind.value}; {elapsed:.3f}s")
        assert p0.kind is Kind.SADDLE_FOCUS_1 and p0.kind.stable_dim == 1
        assert p1.kind is Kind.SADDLE_FOCUS_2 and p2.kind is Kind.SADDLE_FOCUS_2
        for eq in (p0, p1, p2):
            assert np.all(eq.residuals() < 1e-9)
        assert elapsed < 1.0


def test_criterion_02_hopf_point(criterion):
    with criterion(2, "Hopf point b = 1 for a = 1") as c:
        t0 = time.perf_counter()
        b_hopf = hopf_locus(1.0, (0.5, 1.5))
        vals = eigen3(eval_jacobian(cubic2(1.0), (0.0, 0.0, 0.0))).values
        elapsed = time.perf_counter() - t0
        c.note(f"b_hopf = {b_hopf:.12f}; {elapsed:.3f}s")
        assert abs(b_hopf - 1.0) < 1e-6
        # (l + 1)(l^2 + 1)
        for root in (1j, -1j, -1.0):
            assert np.min(np.abs(vals - root)) < 1e-12
        assert elapsed < 1.0


def test_criterion_03_dissipativity(criterion):
    rng = np.random.default_rng(3)
    with criterion(3, "monodromy determinant = exp(-bT)") as c:
        t0 = time.perf_counter()
        worst = 0.0
        for b in (0.3, 0.4, 0.7):
            sys = cubic2(b)
            for _ in range(5):
                # small seeds around the origin stay inside the escape ball over T = 20 even at b = 0.3
                s0 = 0.01 * rng.normal(size=3)
                m = flow_with_monodromy(sys, s0, 20.0)
                expected = math.exp(-b * 20.0)
                worst = max(worst, abs(np.linalg.det(m.matrix) - expected) / expected)
        elapsed = time.perf_counter() - t0
        c.note(f"max relative error {worst:.2e}; {elapsed:.2f}s")
        assert worst < 1e-6
        assert elapsed < 10.0


def _orbits_from_symmetric_seeds(b):
    sys, settings = cubic2(b), AtlasSettings()
    ref = ref_curve(b)
    found = []
    for seed in settings.seeds():
        try:
            found.append(annotate(detect_closed_orbit(sys, seed, settings.orbit, settings.tol), ref))
        except Cubic3dError:
            continue
    return found


def test_criterion_04_rotation_numbers(criterion):
    with criterion(4, "rotation numbers 6, 3, 13, 1, 1, 1") as c:
        expected = [(0.318, 6, None), (0.32, 3, None), (0.4, 1, Symmetry.TWIN), (0.5, 1, Symmetry.SELF_SYMMETRIC),
                    (0.99, 1, Symmetry.SELF_SYMMETRIC)]
        failures = []
        for b, rot, sym in expected:
            orbit = orbit_at(b) if b != 0.99 else orbit_at(b, (0.5, 0.0, 0.0))
            lk = linking_oracle(orbit, ref_curve(b))
            c.note(f"b={b}: rotation {orbit.rotation_number} ({orbit.symmetry.value}), linking {lk}")
            assert orbit.rotation_number == lk
            if orbit.rotation_number != rot or (sym is not None and orbit.symmetry is not sym):
                failures.append(b)
        third = _orbits_from_symmetric_seeds(1.0 / 3.0)
        kinds = sorted({(o.rotation_number, o.symmetry.value, round(o.period, 3)) for o in third})
        c.note(f"b=1/3: {kinds or 'no attracting orbit'}")
        for o in third:
            assert o.rotation_number == linking_oracle(o, ref_curve(1.0 / 3.0))
        if not any(o.rotation_number == 13 and o.symmetry is Symmetry.SELF_SYMMETRIC for o in third):
            failures.append("1/3")
        assert not failures, f"mismatch at b = {failures}"


def test_criterion_05_cascade_divisibility(criterion):
    with criterion(5, "rotation number at b=0.3175 divisible by 3 and > 3") as c:
        t0 = time.perf_counter()
        orbit, attempts = find_orbit(cubic2(0.3175))
        elapsed = time.perf_counter() - t0
        c.note(f"{elapsed:.1f}s")
        assert orbit is not None, f"no verified attracting orbit from {len(attempts)} seeds"
        c.note(f"rotation {orbit.rotation_number}")
        assert orbit.rotation_number % 3 == 0 and orbit.rotation_number > 3
        assert elapsed < 120.0


def test_criterion_06_rotation_bifurcation(criterion):
    with criterion(6, "rotation bifurcation near 0.3184") as c:
        res = bisect_rotation(0.318, 0.32, 2e-4)
        c.note(f"values {res.values}, bracket [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}], "
               f"resolved {res.resolved:.6f}, anomalies {list(res.anomalies)}")
        assert res.kind is BifurcationKind.ROTATION_NUMBER_CHANGE
        assert res.bracket[1] - res.bracket[0] <= 2e-4
        assert 0.3179 <= res.resolved <= 0.3189


def test_criterion_07_homoclinic_bracket(criterion):
    with criterion(7, "homoclinic fate flip inside (0.202, 0.3)") as c:
        lo_fate, hi_fate = branch_fate_at(0.2), branch_fate_at(0.3)
        c.note(f"fate {lo_fate.value} at 0.2, {hi_fate.value} at 0.3")
        assert lo_fate is not hi_fate
        res = bisect_branch_fate(0.202, 0.3, 1e-3)
        c.note(f"bracket [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}]")
        assert 0.202 < res.bracket[0] < res.bracket[1] < 0.3
        assert res.bracket[1] - res.bracket[0] <= 1e-3


def test_criterion_08_twin_merge(criterion):
    with criterion(8, "twin merge a little below 0.49") as c:
        res = bisect_twin_merge(0.4, 0.5, 1e-3)
        c.note(f"bracket [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}], resolved {res.resolved:.6f}")
        assert res.values == (Arrangement.TWIN, Arrangement.SINGLE)
        assert 0.45 < res.resolved < 0.50


def test_criterion_09_regime_scan(criterion):
    with criterion(9, "regime scan 0.3 to 0.34") as c:
        assert not attractor_sample(0.3).bounded
        faint = classification(0.312)
        c.note(f"0.312: {faint.verdict.value}, dwell {faint.evidence['faintness']['dwell']:.0f}")
        assert faint.evidence["bounded"] and faint.verdict is Verdict.FAINT_ATTRACTOR
        for b in (0.317, 0.33, 0.34):
            assert classification(b).verdict is Verdict.COMPLEX_ATTRACTOR, b
        pts = cross_section(attractor_sample(0.317))
        spread = np.ptp(pts, axis=0)
        c.note(f"section at 0.317: {len(pts)} points, spread ({spread[0]:.2f}, {spread[1]:.2f})")
        assert len(pts) >= 100 and np.all(spread > 0.1)


def test_criterion_10_escape_behaviors(criterion):
    with criterion(10, "escape behaviors at b=0.312 and 0.317") as c:
        t0 = time.perf_counter()
        settings = AtlasSettings()
        cloud = sample_attractor_class(0.312, settings)
        sides = []
        for seed in ((1.45, 0.0, -1.5), (0.99, 0.0, 0.0)):
            r = measure_dwell(cloud.system, seed, cloud, settings)
            c.note(f"{seed}: {r.verdict.value}, dwell {r.dwell:.0f}, escape t={r.escape_time}")
            assert r.escaped and r.dwell > settings.t_visit_min
            sides.append(np.sign(r.exit_state[0]))
        assert sides[0] != sides[1]
        quick = measure_dwell(cloud.system, (1.5, -1.5, 0.0), cloud, settings)
        c.note(f"(1.5, -1.5, 0): dwell {quick.dwell:.2f}")
        assert quick.escaped and quick.dwell < settings.t_visit_min
        cloud317 = sample_attractor_class(0.317, settings)
        stay = measure_dwell(cloud317.system, (1.2, 0.0, -1.5), cloud317, settings)
        assert not stay.escaped and stay.verdict is FaintVerdict.ATTRACTING
        elapsed = time.perf_counter() - t0
        c.note(f"{elapsed:.1f}s")
        assert elapsed < 120.0


def test_criterion_11_limit_cycle_not_chaos(criterion):
    with criterion(11, "limit cycle at b=0.7; chaos in cubic2prime and Silnikov7") as c:
        sys = cubic2(0.7)
        orbit = detect_closed_orbit(sys, (0.0, 0.0, 0.1))
        assert classification(0.7).verdict is Verdict.CLOSED_ORBITS
        c.note(f"b=0.7 cycle period {orbit.period:.4f}")
        cases = [(sys, (0.0, 0.0, 0.1), "cubic2 0.7"),
                 (cubic2prime(0.86), (0.01, 0.0, 0.0), "cubic2prime 0.86"),
                 (silnikov7(-0.65, 0.4, 0.0, 1.0), (0.0, 0.0, 0.1), "silnikov7")]
        spectra = {}
        for s, seed, name in cases:
            spec = lyapunov_spectrum(s, seed)
            spectra[name] = spec
            c.note(f"{name}: ({', '.join(f'{v:.4f}' for v in spec.exponents)})")
            assert abs(spec.exponents.sum() - divergence(s)) < 0.01
        assert abs(spectra["cubic2 0.7"].exponents[0]) < 0.02
        assert spectra["cubic2prime 0.86"].exponents[0] > 0.01
        assert spectra["silnikov7"].exponents[0] > 0.01


def test_criterion_12_property_suite(criterion, rng):
    with criterion(12, "property suite") as c:
        # equivariance of the fields
        states = rng.uniform(-3, 3, (200, 3))
        for sys in (cubic2(0.3), cubic2prime(0.86), lorenz()):
            m = symmetry_matrix(sys)
            for s in states:
                assert np.allclose(eval_field(sys, symmetry_image(sys, s)), m @ eval_field(sys, s), atol=1e-12)
        # orbits: Floquet multiplier 1, Liouville product, covariance, rotation = linking
        for b in (0.32, 0.4, 0.5):
            orbit = orbit_at(b)
            assert np.min(np.abs(orbit.floquet - 1.0)) < 1e-5
            assert abs(np.prod(orbit.floquet).real / math.exp(-b * orbit.period) - 1) < 1e-5
            assert orbit.rotation_number == linking_oracle(orbit, ref_curve(b))
            image = orbit.image()
            _, period, res, _ = refine_orbit(orbit.system, image.anchor, image.period)
            assert abs(period - orbit.period) < 1e-8 and res < 1e-8
            assert rotation_number(image, ref_curve(b)) == orbit.rotation_number
        # trace and determinant identities, eigenvalues against a dense solver
        for b in (0.0, 0.3, 0.5, 0.99, 1.5):
            for eq in equilibria(cubic2(b)):
                j = eq.jacobian
                assert abs(eq.eigenvalues.sum() - np.trace(j)) < 1e-10
                assert abs(np.prod(eq.eigenvalues) - np.linalg.det(j)) < 1e-10
                for lam in np.linalg.eigvals(j):
                    assert np.min(np.abs(eq.eigenvalues - lam)) < 1e-8
        # classification is stable under 100x tighter tolerances
        tight = AtlasSettings().tightened(100.0)
        changed = []
        for b in REGIME_B:
            v0 = classification(b).verdict
            v1 = classify_parameter(b, tight).verdict
            if v0 is not v1:
                changed.append((b, v0.value, v1.value))
        c.note(f"tightened classification at {len(REGIME_B)} values, changes {changed}")
        assert not changed
