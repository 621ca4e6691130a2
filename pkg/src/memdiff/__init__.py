"""Bifurcation analysis and simulation of a memory-diffusion model with a
nonlinear boundary law on a 1-D interval."""

__version__ = "0.1.0"
