"""Workbench for an asynchronous pi-calculus with the 1-input property."""

__version__ = "0.1.0"
