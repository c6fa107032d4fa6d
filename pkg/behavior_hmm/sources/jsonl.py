"""
JSON Lines event stream source.
"""

import logging
from pathlib import Path
from typing import Iterator, Union

from ..models import ObservationEvent
from ..storage import iter_event_file
from .base import EventSource

logger = logging.getLogger(__name__)


class JsonlEventSource(EventSource):
    """Reads {"t": seconds, "sym": int} objects, one per line."""

    def __init__(self, path: Union[str, Path]):
        super().__init__(str(path))
        self.path = Path(path)

    def events(self) -> Iterator[ObservationEvent]:
        count = 0
        for line_number, event in iter_event_file(self.path):
            self.position = line_number
            count += 1
            yield event
        logger.debug("Read %d events from %s", count, self.path)
