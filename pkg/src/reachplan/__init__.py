"""Robust predictive motion planning with online-learned obstacle control sets."""
__version__ = "0.1.0"
