"""Simulation of spin-photon graph-state generation with a charged quantum dot."""

__version__ = "0.1.0"
