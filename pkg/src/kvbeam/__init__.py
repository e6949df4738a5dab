"""Numerical laboratory for a transmission bar/beam with local Kelvin-Voigt damping.

Submodules
----------
model       geometry, coefficient profiles and hypothesis validation
config      TOML-style configuration files
fem         finite-element pencils (linear elements for the bar, Hermite cubics for the beam)
timeloop    energy-exact implicit midpoint integration
spectral    resolvent norms on the imaginary axis, spectra and growth fits
exact       layered transfer-matrix solutions, exact norms and the optimality sequence
crosscheck  finite elements against the exact resolvent
rates       decay fits and stability verdicts
experiments desk-scale studies shared by the command line and the tests
cli         ``kvbeam`` command-line front end
"""

from .config import parse_config, parse_config_text
from .errors import (
    AssemblyError,
    ConfigurationError,
    InsufficientDataError,
    InvalidDataError,
    KVBeamError,
    NumericalError,
    SingularityError,
    UnsupportedInputError,
)
from .fem import AssembledPencil, Mesh, assemble, build_mesh, energy_gram, graph_norm
from .model import (
    CoefficientProfile,
    MotionKind,
    TransmissionConfig,
    ValidationReport,
    hypothesis_report,
    validate,
)
from .rates import EvidenceBundle, RateFit, Verdict, decay_report, fit_exponential, fit_power
from .spectral import (
    ResolventScan,
    SpectrumResult,
    growth_exponent,
    resolvent_norm,
    scan,
    spectral_abscissa_trend,
    spectrum,
)
from .timeloop import EnergyTrace, StateVector, dissipation_residual, energy, simulate, step

__version__ = "0.1.0"

__all__ = [
    "AssembledPencil",
    "AssemblyError",
    "CoefficientProfile",
    "ConfigurationError",
    "EnergyTrace",
    "EvidenceBundle",
    "InsufficientDataError",
    "InvalidDataError",
    "KVBeamError",
    "Mesh",
    "MotionKind",
    "NumericalError",
    "RateFit",
    "ResolventScan",
    "SingularityError",
    "SpectrumResult",
    "StateVector",
    "TransmissionConfig",
    "UnsupportedInputError",
    "ValidationReport",
    "Verdict",
    "assemble",
    "build_mesh",
    "decay_report",
    "dissipation_residual",
    "energy",
    "energy_gram",
    "fit_exponential",
    "fit_power",
    "graph_norm",
    "growth_exponent",
    "hypothesis_report",
    "parse_config",
    "parse_config_text",
    "resolvent_norm",
    "scan",
    "simulate",
    "spectral_abscissa_trend",
    "spectrum",
    "step",
    "validate",
]
