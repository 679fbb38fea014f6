"""Experiment runner behind the ``hadamard-gff`` command."""
from .main import main, reproduce, run

__all__ = ["main", "run", "reproduce"]
