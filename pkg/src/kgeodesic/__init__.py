"""Geodesics on surfaces of revolution and the 1/k minimality test on
smoothed cones."""

__version__ = "0.1.0"
