"""Explicit Runge-Kutta methods with energy-preservation order beyond their
classical order: tree/series machinery, condition derivation, a method
registry, Hamiltonian test problems, and a coefficient search."""

__version__ = "0.1.0"
