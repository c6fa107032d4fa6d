"""
Base interface for observation event sources.
"""

from abc import ABC, abstractmethod
from typing import Iterator, Optional

from ..models import ObservationEvent


class EventSource(ABC):
    """Abstract base class for anything that yields observation events."""

    def __init__(self, name: str = ""):
        """
        Initialize the source.

        Args:
            name: Label used in error messages, usually the input file path
        """
        self.name = name
        self.position: Optional[int] = None

    @abstractmethod
    def events(self) -> Iterator[ObservationEvent]:
        """
        Yield observation events in time order.

        Implementations keep `position` pointing at the input line of the
        most recent event so callers can report where processing stopped.
        """
        pass

    def __iter__(self) -> Iterator[ObservationEvent]:
        return self.events()

    def describe(self) -> str:
        return f"{type(self).__name__}({self.name})"
