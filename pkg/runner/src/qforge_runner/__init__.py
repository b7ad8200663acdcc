"""Interpreter-side runner for sandboxed candidate execution."""

__version__ = "0.1.0"
