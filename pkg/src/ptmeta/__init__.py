"""Subwavelength PT-symmetric resonator dimers, metascreens and homogenization.

Modules
-------
geometry          resonator shapes, dimers, lattices and quadrature
greens            free-space and quasiperiodic Helmholtz Green's functions
layer_potentials  single-layer and Neumann-Poincare operators
capacitance       capacitance matrices, periodic and quasiperiodic variants
spectra           leading-order eigenfrequencies, bands and Muller refinement
metascreen        scattering matrix of a PT-symmetric screen
homogenization    Foldy-Lax cavity clouds and the effective medium
cli               command-line driver
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    ConvergenceError,
    IllConditionedError,
    NumericalError,
    PTMetaError,
    SingularityError,
    SymmetryError,
    UnsupportedRegimeError,
    WoodAnomalyError,
)
from .geometry import (  # noqa: E402
    DimerConfig,
    LatticeConfig,
    MaterialParams,
    PTDimer,
    ResonatorShape,
    build_pt_dimer,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "ConvergenceError",
    "IllConditionedError",
    "NumericalError",
    "PTMetaError",
    "SingularityError",
    "SymmetryError",
    "UnsupportedRegimeError",
    "WoodAnomalyError",
    "DimerConfig",
    "LatticeConfig",
    "MaterialParams",
    "PTDimer",
    "ResonatorShape",
    "build_pt_dimer",
]
