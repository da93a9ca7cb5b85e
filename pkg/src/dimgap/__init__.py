"""Dimension gaps for Bernoulli measures of the Gauss map."""
__version__ = "0.1.0"
