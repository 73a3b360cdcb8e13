"""Solvers for high-dimensional non-local nonlinear PDEs with Neumann boundaries."""
