# frustrated_diffusions/__init__.py
"""Simulation and bifurcation analysis of two frustratedly coupled populations of diffusions."""

__version__ = "0.1.0"
