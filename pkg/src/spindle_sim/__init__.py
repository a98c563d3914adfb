"""Simulation of self-similar superprocesses and two-parameter Fleming-Viot
diffusions, built pathwise from stable scaffoldings decorated with squared
Bessel spindles, together with exact transition-kernel samplers and a Monte
Carlo validation catalog for every closed-form law the model admits."""

from spindle_sim.randcore import RngStream

__version__ = "0.1.0"

__all__ = ["RngStream", "__version__"]
