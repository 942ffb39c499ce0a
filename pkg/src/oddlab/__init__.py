"""Numerical toolkit for odd subspaces, the dimension functional and indices in subspaces."""
__version__ = "0.1.0"
