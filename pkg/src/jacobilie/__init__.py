"""Symbolic-numeric verification of Jacobi structures and Jacobi-Lie systems."""

__version__ = "0.1.0"
