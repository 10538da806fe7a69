"""Adjoint and vibrato sensitivities for Monte-Carlo option pricing and CVA."""
__version__ = "0.1.0"
