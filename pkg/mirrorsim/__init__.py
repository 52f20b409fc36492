"""Fringe-visibility simulation for an optomechanical mirror superposition."""

__version__ = "0.1.0"
