"""The four vector-field families and their pointwise evaluations.

Every family is an autonomous polynomial field on R^3:

* ``cubic2``       x' = y, y' = z, z' = x^3 - a^2 x - y - b z
* ``cubic2prime``  same with the cubic sign flipped, z' = a^2 x - x^3 - y - b z
* ``lorenz``       x' = sigma (y - x), y' = rho x - y - x z, z' = -beta z + x y
* ``silnikov7``    z' = alpha (delta x^3 - gamma x^2 - x) - y - beta z

The three jerk-type families share one compiled kernel (``code 0``) through
the coefficients of z' = c3 x^3 + c2 x^2 + c1 x - y - d z.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, InvalidStateError, NoSymmetryError, ParameterError

__all__ = [
    "Family",
    "CubicParams",
    "LorenzParams",
    "SilnikovParams",
    "SystemDef",
    "cubic2",
    "cubic2prime",
    "lorenz",
    "silnikov7",
    "eval_field",
    "eval_jacobian",
    "divergence",
    "symmetry_image",
    "system_from_config",
    "as_state",
]


class Family(str, enum.Enum):
    CUBIC2 = "cubic2"
    CUBIC2_PRIME = "cubic2prime"
    LORENZ = "lorenz"
    SILNIKOV7 = "silnikov7"


def _finite(key, value):
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(key, f"must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class CubicParams:
    a: float = 1.0
    b: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "a", _finite("a", self.a))
        object.__setattr__(self, "b", _finite("b", self.b))
        if self.a <= 0:
            raise ParameterError("a", f"must be > 0, got {self.a}")
        if self.b < 0:
            raise ParameterError("b", f"must be >= 0, got {self.b}")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        for key in ("sigma", "rho", "beta"):
            value = _finite(key, getattr(self, key))
            if value <= 0:
                raise ParameterError(key, f"must be > 0, got {value}")
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class SilnikovParams:
    alpha: float = 1.0
    beta: float = 0.4
    gamma: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        for key in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, key, _finite(key, getattr(self, key)))
        if self.beta < 0:
            raise ParameterError("beta", f"must be >= 0, got {self.beta}")


_PARAM_TYPES = {
    Family.CUBIC2: CubicParams,
    Family.CUBIC2_PRIME: CubicParams,
    Family.LORENZ: LorenzParams,
    Family.SILNIKOV7: SilnikovParams,
}


@dataclass(frozen=True)
class SystemDef:
    """An immutable (family, parameters) pair.

    Build one per parameter point; instances are hashable and safe to share
    between threads.
    """

    family: Family
    params: CubicParams | LorenzParams | SilnikovParams
    kernel_code: int = field(init=False, repr=False, compare=False)
    kernel_params: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        expected = _PARAM_TYPES[family]
        if not isinstance(self.params, expected):
            raise ParameterError("params", f"{family.value} needs {expected.__name__}")
        p = self.params
        if family is Family.CUBIC2:
            code, kp = 0, (1.0, 0.0, -p.a * p.a, p.b)
        elif family is Family.CUBIC2_PRIME:
            code, kp = 0, (-1.0, 0.0, p.a * p.a, p.b)
        elif family is Family.SILNIKOV7:
            code, kp = 0, (p.alpha * p.delta, -p.alpha * p.gamma, -p.alpha, p.beta)
        else:
            code, kp = 1, (p.sigma, p.rho, p.beta, 0.0)
        object.__setattr__(self, "kernel_code", code)
        object.__setattr__(self, "kernel_params", kp)

    @property
    def b(self) -> float:
        """Damping coefficient (b for the cubic families, beta for silnikov7)."""
        if self.family is Family.LORENZ:
            raise AttributeError("lorenz has no damping coefficient b")
        return self.params.beta if self.family is Family.SILNIKOV7 else self.params.b

    @property
    def has_point_symmetry(self) -> bool:
        return not (self.family is Family.SILNIKOV7 and self.params.gamma != 0.0)

    def with_params(self, **changes) -> "SystemDef":
        values = {k: getattr(self.params, k) for k in self.params.__dataclass_fields__}
        values.update(changes)
        return SystemDef(self.family, type(self.params)(**values))

    def describe(self) -> dict:
        out = {"family": self.family.value}
        out.update({k: getattr(self.params, k) for k in self.params.__dataclass_fields__})
        return out


def cubic2(b: float, a: float = 1.0) -> SystemDef:
    return SystemDef(Family.CUBIC2, CubicParams(a=a, b=b))


def cubic2prime(b: float, a: float = 1.0) -> SystemDef:
    return SystemDef(Family.CUBIC2_PRIME, CubicParams(a=a, b=b))


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> SystemDef:
    return SystemDef(Family.LORENZ, LorenzParams(sigma=sigma, rho=rho, beta=beta))


def silnikov7(alpha: float, beta: float, gamma: float = 0.0, delta: float = 1.0) -> SystemDef:
    return SystemDef(Family.SILNIKOV7, SilnikovParams(alpha=alpha, beta=beta, gamma=gamma, delta=delta))


def as_state(s) -> np.ndarray:
    """Coerce to a finite float array of shape (3,)."""
    arr = np.asarray(s, dtype=float)
    if arr.shape != (3,):
        raise InvalidStateError(f"state must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidStateError(f"non-finite state {arr!r}")
    return arr


def eval_field(sys: SystemDef, s) -> np.ndarray:
    """Return (P, Q, R) at ``s``, written exactly as the family's equations."""
    x, y, z = as_state(s)
    p = sys.params
    fam = sys.family
    if fam is Family.CUBIC2:
        return np.array([y, z, x**3 - p.a**2 * x - y - p.b * z])
    if fam is Family.CUBIC2_PRIME:
        return np.array([y, z, p.a**2 * x - x**3 - y - p.b * z])
    if fam is Family.SILNIKOV7:
        return np.array([y, z, p.alpha * (p.delta * x**3 - p.gamma * x**2 - x) - y - p.beta * z])
    return np.array([p.sigma * (y - x), p.rho * x - y - x * z, -p.beta * z + x * y])


def eval_jacobian(sys: SystemDef, s) -> np.ndarray:
    x, y, z = as_state(s)
    p = sys.params
    fam = sys.family
    if fam is Family.LORENZ:
        return np.array([
            [-p.sigma, p.sigma, 0.0],
            [p.rho - z, -1.0, -x],
            [y, x, -p.beta],
        ])
    if fam is Family.CUBIC2:
        dRdx, damp = 3 * x**2 - p.a**2, p.b
    elif fam is Family.CUBIC2_PRIME:
        dRdx, damp = p.a**2 - 3 * x**2, p.b
    else:
        dRdx, damp = p.alpha * (3 * p.delta * x**2 - 2 * p.gamma * x - 1), p.beta
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [dRdx, -1.0, -damp]])


def divergence(sys: SystemDef, s=None) -> float:
    """Trace of the Jacobian; constant for all four families."""
    if s is not None:
        as_state(s)
    if sys.family is Family.LORENZ:
        p = sys.params
        return -(p.sigma + 1.0 + p.beta)
    return -sys.b


def symmetry_image(sys: SystemDef, s) -> np.ndarray:
    """Image of ``s`` under the family's involution.

    Point reflection through the origin for the jerk-type families, rotation
    by pi about the z-axis for Lorenz.  Also valid for derivative vectors,
    since both maps are linear.
    """
    arr = as_state(s)
    if sys.family is Family.LORENZ:
        return np.array([-arr[0], -arr[1], arr[2]])
    if not sys.has_point_symmetry:
        raise NoSymmetryError("silnikov7 with gamma != 0 has no point symmetry")
    return -arr


def symmetry_matrix(sys: SystemDef) -> np.ndarray:
    if sys.family is Family.LORENZ:
        return np.diag([-1.0, -1.0, 1.0])
    if not sys.has_point_symmetry:
        raise NoSymmetryError("silnikov7 with gamma != 0 has no point symmetry")
    return -np.eye(3)


_FAMILY_KEYS = {
    Family.CUBIC2: {"a", "b"},
    Family.CUBIC2_PRIME: {"a", "b"},
    Family.LORENZ: {"sigma", "rho", "beta"},
    Family.SILNIKOV7: {"alpha", "beta", "gamma", "delta"},
}


def system_from_config(section: Mapping[str, Any]) -> SystemDef:
    """Build a SystemDef from a key-value section such as a TOML table.

    >>> system_from_config({"family": "cubic2", "a": 1.0, "b": 0.312}).b
    0.312
    """
    section = dict(section)
    try:
        family = Family(str(section.pop("family", "cubic2")).lower())
    except ValueError as exc:
        raise ConfigError("family", str(exc)) from None
    allowed = _FAMILY_KEYS[family]
    for key, value in section.items():
        if key not in allowed:
            raise ConfigError(key, f"unknown key for family {family.value}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
    try:
        params = _PARAM_TYPES[family](**{k: float(v) for k, v in section.items()})
    except ParameterError as exc:
        raise ConfigError(exc.key, exc.message) from None
    return SystemDef(family, params)
