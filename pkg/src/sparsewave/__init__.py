"""Wave propagation through sparse spherical barriers.

Modules: ``potential`` (layers and sparseness), ``sphere`` (harmonic
transforms), ``greens`` (free amplitudes, Born solves, layer coefficients),
``wkb`` (the multiplicative WKB factor), ``propagate`` (layer recursion and
evolution), ``radial`` (radial oracle, gap growth, eigenvalue absence),
``spectral`` (harmonic measure and entropy bound), ``seqbounds`` (sequence
lemmas) and ``cli``.
"""

from .errors import (
    CertificateFailure,
    ConfigError,
    InvalidPotentialError,
    NonConvergenceError,
    ResolutionError,
    SparseWaveError,
    StepSizeError,
    StiffnessError,
    TruncationError,
)
from .greens import SourceSpec, ball_amplitude, born_solve, free_amplitude
from .potential import BumpEnsemble, LayerSpec, RadialProfile, SparsePotential, validate_sparseness
from .propagate import evolution_solve, propagate_recursion
from .radial import eigenvalue_absence_check, radial_amplitude_oracle, solve_radial
from .spectral import TriangleDomain, entropy_lower_bound, harmonic_measure_triangle
from .sphere import SphereGrid, SphericalField, build_grid
from .wkb import wkb_factor

__version__ = "0.1.0"

__all__ = [
    "BumpEnsemble",
    "CertificateFailure",
    "ConfigError",
    "InvalidPotentialError",
    "LayerSpec",
    "NonConvergenceError",
    "RadialProfile",
    "ResolutionError",
    "SourceSpec",
    "SparsePotential",
    "SparseWaveError",
    "SphereGrid",
    "SphericalField",
    "StepSizeError",
    "StiffnessError",
    "TriangleDomain",
    "TruncationError",
    "ball_amplitude",
    "born_solve",
    "build_grid",
    "entropy_lower_bound",
    "eigenvalue_absence_check",
    "evolution_solve",
    "free_amplitude",
    "harmonic_measure_triangle",
    "propagate_recursion",
    "radial_amplitude_oracle",
    "solve_radial",
    "validate_sparseness",
    "wkb_factor",
]
