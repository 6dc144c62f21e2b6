"""Entropy-stable discontinuous Galerkin solvers built on decoupled SBP operators."""

__version__ = "0.1.0"
