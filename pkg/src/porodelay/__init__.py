"""Simulation and verification engine for a 1D nonlinear porous-elastic
system with a delayed frictional damping term."""

from .model import ForcingSpec, InitialData, PhysicalParams, validate_params
from .scenario import Scenario, default_scenario, load_scenario
from .state import GridSpec, SimState, Trajectory, build_grid

__all__ = ["ForcingSpec", "InitialData", "PhysicalParams", "validate_params", "Scenario",
           "default_scenario", "load_scenario", "GridSpec", "SimState", "Trajectory", "build_grid"]
