"""Semi-analytic oracle: layered closed-form resolvent solutions."""

from .forcing import ExpPoly, Forcing, ForcingPiece, particular_solution
from .layers import LayerMatrix, beam_eta, beam_layer, complex_omega, krylov_functions, wave_layer
from .norm import exact_resolvent_norm, exact_smallest_singular_value, singular_value_indicator
from .optimality import (
    OptimalityPoint,
    blowup_slope,
    optimality_forcing,
    optimality_frequency,
    optimality_point,
    optimality_sequence,
    stable_coth,
    write_optimality_csv,
)
from .resolvent import ExactSolution, LayerSolution, exact_resolvent, layer_partition

__all__ = [
    "ExpPoly",
    "Forcing",
    "ForcingPiece",
    "particular_solution",
    "LayerMatrix",
    "beam_eta",
    "beam_layer",
    "complex_omega",
    "krylov_functions",
    "wave_layer",
    "exact_resolvent_norm",
    "exact_smallest_singular_value",
    "singular_value_indicator",
    "OptimalityPoint",
    "blowup_slope",
    "optimality_forcing",
    "optimality_frequency",
    "optimality_point",
    "optimality_sequence",
    "stable_coth",
    "write_optimality_csv",
    "ExactSolution",
    "LayerSolution",
    "exact_resolvent",
    "layer_partition",
]
