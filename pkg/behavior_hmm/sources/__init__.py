"""
Observation event sources.
"""

from .base import EventSource
from .jsonl import JsonlEventSource
from .positions import PositionCsvSource, SimRunSource

__all__ = ["EventSource", "JsonlEventSource", "PositionCsvSource", "SimRunSource"]
