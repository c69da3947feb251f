"""Expressivity lab for graph-structured multi-agent communication."""

__version__ = "0.1.0"
