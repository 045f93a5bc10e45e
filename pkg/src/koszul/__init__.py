"""Dolbeault-Koszul calculus on flat tori, products of tori and finite quotients."""

__version__ = "0.1.0"
