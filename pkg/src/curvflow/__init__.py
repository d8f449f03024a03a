"""Finite-difference and reduced-ODE checks of the evolution of hypersurfaces
under mean curvature flow in Euclidean, spherical, hyperbolic and complex
projective/hyperbolic model spaces."""

from .ambient import AmbientModel
from .catalog import build, spectrum_for
from .flow import EvolutionEquation, FlowTrace, gap_monitor, max_principle_check, run_pde_flow
from .immersion import Grid, ParametrizedImmersion, fundamental_forms
from .parallel import IsoparametricSpectrum, ParallelFamily, flow_ode

__version__ = "0.1.0"

__all__ = [
    "AmbientModel", "EvolutionEquation", "FlowTrace", "Grid", "IsoparametricSpectrum", "ParallelFamily",
    "ParametrizedImmersion", "build", "flow_ode", "fundamental_forms", "gap_monitor",
    "max_principle_check", "run_pde_flow", "spectrum_for",
]
