"""Utility functions and helpers"""

from .cache import PointCache
from .formatters import Formatter

__all__ = ["Formatter", "PointCache"]
