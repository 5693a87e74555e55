"""Exponentially convergent approximation spaces for harmonic functions."""
