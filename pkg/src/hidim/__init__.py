"""High-dimensional convex M-estimation: mean-field theory, optimal losses and Monte Carlo checks."""

__version__ = "0.1.0"
