"""Numerical construction of small Hamiltonian stationary Lagrangian tori."""

__version__ = "0.1.0"
