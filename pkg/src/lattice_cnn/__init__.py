"""Lattice CNNs for matching-based question answering."""

__version__ = "0.1.0"
