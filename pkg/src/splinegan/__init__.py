"""Continuous-time motion representations and a desk-scale video GAN."""

__version__ = "0.1.0"
