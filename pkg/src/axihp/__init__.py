"""Axisymmetric h/p/hp-adaptive finite elements for electromagnetic benchmarks."""

__version__ = "0.1.0"
