"""Agmon-type decay estimates for Schrodinger operators on weighted graphs."""

__version__ = "0.1.0"
