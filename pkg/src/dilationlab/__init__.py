"""Computational toolkit for rank-2 graph semigroups, their representations and dilations."""

__version__ = "0.1.0"
