"""Relative equilibria of torus-symmetric Hamiltonian systems under symmetry breaking."""
__version__ = "0.1.0"
