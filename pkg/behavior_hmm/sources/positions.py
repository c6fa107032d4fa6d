"""
Event sources that run position streams through perception.
"""

import logging
from pathlib import Path
from typing import Iterator, Optional, Union

from ..config import FilterConfig, QuantizerConfig
from ..models import ObservationEvent
from ..perception import PerceptionPipeline
from ..simulator import SimRun
from ..storage import read_positions_csv, read_sim_run
from .base import EventSource

logger = logging.getLogger(__name__)


class PositionCsvSource(EventSource):
    """Turns a `t,x,y` CSV into turn events with the Kalman filter and detector."""

    def __init__(
        self,
        path: Union[str, Path],
        filter_config: Optional[FilterConfig] = None,
        quantizer_config: Optional[QuantizerConfig] = None,
    ):
        super().__init__(str(path))
        self.path = Path(path)
        self.filter_config = filter_config
        self.quantizer_config = quantizer_config

    def events(self) -> Iterator[ObservationEvent]:
        frame = read_positions_csv(self.path)
        pipeline = PerceptionPipeline(self.filter_config, self.quantizer_config)
        for row, t, x, y in frame.itertuples(name=None):
            self.position = int(row) + 2  # header is line 1
            event = pipeline.push(t, x, y)
            if event is not None:
                yield event
        event = pipeline.finish()
        if event is not None:
            yield event


class SimRunSource(EventSource):
    """Turn events perceived from a simulated run's measurements."""

    def __init__(
        self,
        run: Union[SimRun, str, Path],
        filter_config: Optional[FilterConfig] = None,
        quantizer_config: Optional[QuantizerConfig] = None,
    ):
        if isinstance(run, SimRun):
            super().__init__(f"{run.behavior} seed {run.config.seed}")
            self.run = run
        else:
            super().__init__(str(run))
            self.run = read_sim_run(run)
        self.filter_config = filter_config
        self.quantizer_config = quantizer_config

    def events(self) -> Iterator[ObservationEvent]:
        pipeline = PerceptionPipeline(self.filter_config, self.quantizer_config)
        for index, (t, x, y) in enumerate(self.run.measurements):
            self.position = index
            event = pipeline.push(float(t), float(x), float(y))
            if event is not None:
                yield event
        event = pipeline.finish()
        if event is not None:
            yield event
