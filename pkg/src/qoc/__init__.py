"""Quantum optimal control with machine-precision gradients for
arbitrary final-time functionals: GRAPE with extended-state step
gradients, Krotov's method, Chebychev propagation, and two-qubit
entanglement functionals."""

__version__ = "0.1.0"
