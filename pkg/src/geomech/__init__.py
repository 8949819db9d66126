"""Symbolic toolkit for geometric mechanics on tangent and cotangent bundles."""

__version__ = "0.1.0"
