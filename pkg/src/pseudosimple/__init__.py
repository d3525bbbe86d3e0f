"""Pseudo-simple heteroclinic cycles in equivariant ODEs on R^4."""
__version__ = "0.1.0"
