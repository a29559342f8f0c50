"""Simulation and stability verification for a piezoelectric beam with
magnetic effect under time-varying delayed damping."""

__version__ = "0.1.0"
