"""Equilibria, 3x3 eigen-analysis through the characteristic cubic, Hopf locus."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NotFoundError
from .systems import Family, SystemDef, cubic2, eval_jacobian

__all__ = [
    "Kind",
    "Equilibrium",
    "Eigen3",
    "cubic_roots",
    "eigen3",
    "classify",
    "equilibria",
    "equilibrium",
    "hopf_locus",
]

DISCRIMINANT_TOL = 1e-10
IMAG_AXIS_TOL = 1e-9


class Kind(str, enum.Enum):
    SADDLE_FOCUS_1 = "saddle-focus (1d stable)"
    SADDLE_FOCUS_2 = "saddle-focus (2d stable)"
    STABLE_FOCUS_NODE = "stable focus/node"
    UNSTABLE_FOCUS_NODE = "unstable focus/node"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"

    @property
    def stable_dim(self) -> int | None:
        return {"saddle-focus (1d stable)": 1, "saddle-focus (2d stable)": 2,
                "stable focus/node": 3, "unstable focus/node": 0}.get(self.value)

    @property
    def is_saddle_focus(self) -> bool:
        return self in (Kind.SADDLE_FOCUS_1, Kind.SADDLE_FOCUS_2)


@dataclass(frozen=True)
class Eigen3:
    values: np.ndarray   # (3,) complex, real part descending
    vectors: np.ndarray  # (3, 3) complex, vectors[i] pairs with values[i]
    degenerate: bool
    discriminant: float

    def __iter__(self):
        return iter(zip(self.values, self.vectors))


def _polish(coeffs, root):
    c2, c1, c0 = coeffs
    for _ in range(3):
        f = ((root + c2) * root + c1) * root + c0
        df = (3 * root + 2 * c2) * root + c1
        if abs(df) < 1e-14:
            break
        step = f / df
        root = root - step
        if abs(step) <= 1e-16 * max(1.0, abs(root)):
            break
    return root


def cubic_roots(c2: float, c1: float, c0: float) -> tuple[np.ndarray, float]:
    """Roots of l^3 + c2 l^2 + c1 l + c0 and the discriminant.

    Trigonometric form for three real roots, Cardano otherwise, one Newton
    polish per root.  Roots are sorted by real part (then imaginary part)
    descending.
    """
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = -(4.0 * p**3 + 27.0 * q * q)
    if abs(disc) <= DISCRIMINANT_TOL:
        if abs(p) <= 1e-12:
            ts = [0.0, 0.0, 0.0]
        else:
            ts = [3.0 * q / p, -1.5 * q / p, -1.5 * q / p]
        roots = [complex(t - shift) for t in ts]
    elif disc > 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [complex(m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift) for k in range(3)]
    else:
        r = math.sqrt(q * q / 4.0 + p**3 / 27.0)
        u = np.cbrt(-q / 2.0 + r)
        v = np.cbrt(-q / 2.0 - r)
        re = -(u + v) / 2.0 - shift
        im = math.sqrt(3.0) / 2.0 * abs(u - v)
        roots = [complex(u + v - shift), complex(re, im), complex(re, -im)]
    roots = [_polish((c2, c1, c0), z) for z in roots]
    if disc < -DISCRIMINANT_TOL:
        # keep the pair exactly conjugate and the lone root exactly real
        real_root = roots[0].real
        pair = roots[1]
        roots = [complex(real_root), complex(pair.real, abs(pair.imag)), complex(pair.real, -abs(pair.imag))]
    elif disc > DISCRIMINANT_TOL:
        roots = [complex(z.real) for z in roots]
    roots.sort(key=lambda z: (z.real, z.imag), reverse=True)
    return np.array(roots), float(disc)


def _null_vector(m: np.ndarray, lam: complex) -> np.ndarray:
    a = m.astype(complex) - lam * np.eye(3)
    best, best_norm = None, -1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = np.cross(a[i], a[j])
        n = float(np.linalg.norm(v))
        if n > best_norm:
            best, best_norm = v, n
    if best_norm == 0.0:
        # rank <= 1: any vector orthogonal to the nonzero row
        row = a[np.argmax(np.linalg.norm(a, axis=1))]
        e = np.zeros(3, dtype=complex)
        e[np.argmin(np.abs(row))] = 1.0
        best = np.cross(row, e)
        if np.linalg.norm(best) == 0.0:
            best = e
    v = best / np.linalg.norm(best)
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    v[k] = abs(v[k])
    return v


def eigen3(m) -> Eigen3:
    """Eigenpairs of a real 3x3 matrix via its characteristic cubic.

    Eigenvectors come from the largest cross product of two rows of
    ``m - lam I``, scaled to unit norm with the largest component real and
    positive.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("eigen3 needs a finite 3x3 matrix")
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    minors = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
              + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
              + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    det = float(np.linalg.det(m))
    values, disc = cubic_roots(-tr, minors, -det)
    vectors = np.array([_null_vector(m, lam) for lam in values])
    return Eigen3(values, vectors, abs(disc) <= DISCRIMINANT_TOL, disc)


def _kind_from_values(values: np.ndarray, degenerate: bool = False) -> Kind:
    if degenerate or np.any(np.abs(values.real) < IMAG_AXIS_TOL):
        return Kind.DEGENERATE
    complex_mask = np.abs(values.imag) > 0.0
    n_stable = int(np.sum(values.real < 0))
    if np.any(complex_mask):
        real = values[~complex_mask][0].real
        pair_re = values[complex_mask][0].real
        if real < 0 < pair_re:
            return Kind.SADDLE_FOCUS_1
        if pair_re < 0 < real:
            return Kind.SADDLE_FOCUS_2
    if n_stable == 3:
        return Kind.STABLE_FOCUS_NODE
    if n_stable == 0:
        return Kind.UNSTABLE_FOCUS_NODE
    return Kind.SADDLE


@dataclass(frozen=True, eq=False)
class Equilibrium:
    system: SystemDef
    name: str
    location: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kind: Kind

    @property
    def jacobian(self) -> np.ndarray:
        return eval_jacobian(self.system, self.location)

    def real_eigen(self, sign: int) -> tuple[float, np.ndarray]:
        """The real eigenvalue with the given sign and its real unit eigenvector."""
        for lam, v in zip(self.eigenvalues, self.eigenvectors):
            if lam.imag == 0.0 and np.sign(lam.real) == sign:
                return lam.real, v.real / np.linalg.norm(v.real)
        raise LookupError(f"no real eigenvalue with sign {sign:+d}")

    def complex_pair(self) -> tuple[complex, np.ndarray]:
        """The eigenvalue with positive imaginary part and its eigenvector."""
        for lam, v in zip(self.eigenvalues, self.eigenvectors):
            if lam.imag > 0.0:
                return lam, v
        raise LookupError("no complex eigenvalue pair")

    def residuals(self) -> np.ndarray:
        j = self.jacobian
        return np.array([np.linalg.norm(j @ v - lam * v) for lam, v in zip(self.eigenvalues, self.eigenvectors)])


def classify(eq: Equilibrium) -> Kind:
    """Stability type from the eigenvalues; ``DEGENERATE`` means refused."""
    return _kind_from_values(np.asarray(eq.eigenvalues))


def _build(sys: SystemDef, name: str, loc) -> Equilibrium:
    loc = np.asarray(loc, dtype=float)
    eig = eigen3(eval_jacobian(sys, loc))
    return Equilibrium(sys, name, loc, eig.values, eig.vectors, _kind_from_values(eig.values, eig.degenerate))


def equilibria(sys: SystemDef) -> list[Equilibrium]:
    """All equilibria, origin first, then the negative-x and positive-x points.

    Names follow p0/p1/p2 (q0/q1/q2 for Lorenz).
    """
    p = sys.params
    fam = sys.family
    if fam in (Family.CUBIC2, Family.CUBIC2_PRIME):
        xs = [0.0, -p.a, p.a]
    elif fam is Family.LORENZ:
        if p.rho <= 1.0:
            return [_build(sys, "q0", [0.0, 0.0, 0.0])]
        r = math.sqrt(p.beta * (p.rho - 1.0))
        return [_build(sys, "q0", [0.0, 0.0, 0.0]),
                _build(sys, "q1", [-r, -r, p.rho - 1.0]),
                _build(sys, "q2", [r, r, p.rho - 1.0])]
    else:
        if p.alpha == 0.0:
            raise NotFoundError("silnikov7 with alpha = 0 has a line of equilibria")
        # alpha x (delta x^2 - gamma x - 1) = 0
        xs = [0.0]
        if p.delta == 0.0:
            if p.gamma != 0.0:
                xs.append(-1.0 / p.gamma)
        else:
            disc = p.gamma**2 + 4.0 * p.delta
            if disc >= 0:
                r = math.sqrt(disc)
                xs.extend(sorted([(p.gamma - r) / (2 * p.delta), (p.gamma + r) / (2 * p.delta)]))
    return [_build(sys, f"p{i}", [x, 0.0, 0.0]) for i, x in enumerate(xs)]


def equilibrium(sys: SystemDef, name: str) -> Equilibrium:
    for eq in equilibria(sys):
        if eq.name == name:
            return eq
    raise NotFoundError(f"no equilibrium named {name!r}")


def _pair_real_part(sys: SystemDef) -> float:
    eq = equilibria(sys)[0]
    pair = [lam for lam in eq.eigenvalues if lam.imag != 0.0]
    if not pair:
        raise NotFoundError(f"no complex pair at the origin for {sys.describe()}")
    return float(pair[0].real)


def hopf_locus(a: float = 1.0, b_range: tuple[float, float] = (0.5, 1.5)) -> float:
    """Damping b at which the origin's complex pair crosses the imaginary axis (cubic2)."""
    lo, hi = b_range
    g_lo = _pair_real_part(cubic2(lo, a))
    g_hi = _pair_real_part(cubic2(hi, a))
    if g_lo * g_hi > 0:
        raise NotFoundError(f"no sign change of the pair's real part on [{lo}, {hi}]")
    return float(brentq(lambda b: _pair_real_part(cubic2(b, a)), lo, hi, xtol=1e-14, rtol=1e-15))
