"""Power-weighted Euclidean functionals, boundary duals and Monte Carlo rate experiments."""

__version__ = "0.1.0"
