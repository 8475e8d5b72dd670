"""Carathéodory delay equations: bounds, seminorm topologies, method of steps."""
__version__ = "0.1.0"
