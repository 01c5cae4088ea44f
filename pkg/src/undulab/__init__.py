"""Desk-scale laboratory for translocal oscillator networks, clique-graph
coarse-graining, weakly nonlinear averaging, anticorrelated fluctuation
fields and the amplitude/phase form of quantum dynamics."""

__version__ = "0.1.0"
