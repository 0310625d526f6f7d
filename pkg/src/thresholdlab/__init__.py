"""Threshold eigenvalues of dissipative Schrodinger operators -Delta + V1 - i lambda V2."""

__version__ = "0.1.0"
