"""Pair creation in asymmetric Sauter wells: split-operator field evolution
and the sharp-wall resonance model."""

__version__ = "0.1.0"

from .dirac_core import C_LIGHT, BasisLabel, Branch, GridSpec, SpinorField, WellParams
from .evolution import BogoliubovMatrix, EvolutionError, PropagatorConfig, bogoliubov_evolution, propagate
from .observables import NumberSeries, Species, SpectrumSeries

__all__ = [
    "C_LIGHT",
    "BasisLabel",
    "BogoliubovMatrix",
    "Branch",
    "EvolutionError",
    "GridSpec",
    "NumberSeries",
    "PropagatorConfig",
    "Species",
    "SpectrumSeries",
    "SpinorField",
    "WellParams",
    "bogoliubov_evolution",
    "propagate",
]
