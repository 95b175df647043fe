"""Glauber dynamics of the 2D Kac Blume-Capel model and its quartic/sextic
stochastic-PDE scaling limits: microscopic simulator, renormalized spectral
solver, and the statistical harness comparing the two."""

__version__ = "0.1.0"
