"""Fractional Laplacian with nonlocal Neumann conditions in one dimension."""

__version__ = "0.1.0"
