"""Counterexample machinery for the maximal operator on variable Lebesgue spaces
over finite spaces of homogeneous type."""

__version__ = "0.1.0"
