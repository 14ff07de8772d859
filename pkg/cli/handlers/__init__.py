"""Handlers package initialization."""
from . import solve, identify, estimate, simulate, bench

__all__ = ["solve", "identify", "estimate", "simulate", "bench"]
