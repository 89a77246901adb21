"""Two-stage generative model of segmented articulated figures."""

__version__ = "0.1.0"
