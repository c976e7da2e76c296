"""Quasi-reversibility method for ill-posed Cauchy problems."""

__version__ = "0.1.0"
