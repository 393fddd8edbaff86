"""Numerical study of the cubic jerk system x' = y, y' = z, z' = x^3 - a^2 x - y - b z.

Equilibria and their invariant manifolds, attractor-class sampling, closed
orbits with rotation numbers about the origin's 1D stable manifold,
bifurcation bisections and Lyapunov spectra, for the cubic system and its
sign-flipped, Lorenz and Silnikov relatives.
"""

__version__ = "0.1.0"

from ._kernel import BACKEND
from .errors import *  # noqa: F401,F403
from .integrator import (Crossing, Monodromy, PlaneEvent, Tolerances, Trajectory, crossings,
                         flow_with_monodromy, integrate)
from .manifolds import Fate, FateKind, ManifoldBranch, Rotation, Stability, expand_2d, rotation_direction, trace_1d
from .orbits import (ClosedOrbit, LyapunovSpectrum, OrbitSettings, Symmetry, classify_symmetry,
                     detect_closed_orbit, floquet, linking_oracle, lyapunov_spectrum, reference_curve,
                     rotation_number)
from .spectral import Equilibrium, Kind, classify, eigen3, equilibria, equilibrium, hopf_locus
from .systems import (Family, SystemDef, cubic2, cubic2prime, divergence, eval_field, eval_jacobian, lorenz,
                      silnikov7, symmetry_image)

__all__ = [
    "__version__", "BACKEND",
    "Family", "SystemDef", "cubic2", "cubic2prime", "lorenz", "silnikov7",
    "eval_field", "eval_jacobian", "divergence", "symmetry_image",
    "Tolerances", "Trajectory", "PlaneEvent", "Crossing", "Monodromy",
    "integrate", "crossings", "flow_with_monodromy",
    "Equilibrium", "Kind", "equilibria", "equilibrium", "eigen3", "classify", "hopf_locus",
    "Stability", "FateKind", "Fate", "ManifoldBranch", "Rotation", "trace_1d", "expand_2d", "rotation_direction",
    "ClosedOrbit", "OrbitSettings", "Symmetry", "LyapunovSpectrum", "detect_closed_orbit", "reference_curve",
    "rotation_number", "linking_oracle", "classify_symmetry", "floquet", "lyapunov_spectrum",
]
