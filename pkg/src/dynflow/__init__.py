"""Flows on Euclidean space: exterior algebra, differential and integral characteristics,
variational checks and harmonic surface relaxation."""

__version__ = "0.1.0"
