"""Uncertainty quantification for the linearized Boltzmann equation."""
__version__ = "0.1.0"
