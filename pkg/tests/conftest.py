import functools

import numpy as np
import pytest

from cubic3d.atlas import classify_parameter, sample_attractor_class
from cubic3d.orbits import annotate, detect_closed_orbit, reference_curve
from cubic3d.systems import cubic2

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def ref_curve(b):
    return reference_curve(cubic2(b))


@functools.lru_cache(maxsize=None)
def orbit_at(b, seed=(1.2, 0.0, -1.5)):
    """Detected, annotated orbit; cached across test modules."""
    sys = cubic2(b)
    return annotate(detect_closed_orbit(sys, seed), ref_curve(b))


@functools.lru_cache(maxsize=None)
def classification(b):
    return classify_parameter(b)


@functools.lru_cache(maxsize=None)
def attractor_sample(b):
    return sample_attractor_class(b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class Criterion:
    """Records one acceptance criterion's verdict for the terminal summary."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.notes = []

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = "; ".join(self.notes)
        if not ok:
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else exc_type.__name__
            detail = f"{detail}; {msg}" if detail else msg
        ACCEPTANCE[self.number] = (ok, self.title, detail)
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
                                    + (f"  [{detail}]" if detail else ""))
