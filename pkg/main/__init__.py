"""
Command-line application for the staged RL workbench.
"""

from .cli import main

__all__ = ["main"]
