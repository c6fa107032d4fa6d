"""
Perception: noisy positions -> Kalman velocity -> turn events -> symbols.

A constant-velocity Kalman filter estimates the agent's velocity from
timestamped (x, y) fixes. The heading of that velocity feeds an event
detector that fires once per completed change of direction; the signed turn
angle is quantized into one of n_bins equal bins centered on multiples of
360/n_bins degrees (bin 0 is "straight on").
"""

import logging
import math
from collections import deque
from typing import Deque, Iterable, List, Optional, Tuple

import numpy as np

from .config import FilterConfig, QuantizerConfig
from .errors import MeasurementError, NonMonotonicTimeError
from .models import ObservationEvent, TrackState

logger = logging.getLogger(__name__)

H = np.array([[1.0, 0.0, 0.0, 0.0],
              [0.0, 1.0, 0.0, 0.0]])

MIN_PARTIAL_SAMPLES = 3


def wrap_degrees(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    wrapped = math.fmod(angle, 360.0)
    if wrapped <= -180.0:
        wrapped += 360.0
    elif wrapped > 180.0:
        wrapped -= 360.0
    return wrapped


def quantize_turn(angle: float, n_bins: int = 8) -> int:
    """
    Map a signed turn angle (degrees) to its bin index.

    Bin k covers [k*w - w/2, k*w + w/2) modulo 360 with w = 360 / n_bins, so
    a boundary belongs to the bin above it.
    """
    width = 360.0 / n_bins
    return int(math.floor((wrap_degrees(angle) + width / 2.0) / width)) % n_bins


def mirror_symbol(symbol: int, n_bins: int = 8) -> int:
    """Bin index of the negated turn angle."""
    return (n_bins - symbol) % n_bins


def bin_center(symbol: int, n_bins: int = 8) -> float:
    return wrap_degrees(symbol * 360.0 / n_bins)


def kf_init(x: float, y: float, time: float, noise: Optional[FilterConfig] = None) -> TrackState:
    """Start a track at a first position fix with zero velocity."""
    noise = noise or FilterConfig()
    _check_measurement((x, y), time)
    return TrackState(
        mean=np.array([x, y, 0.0, 0.0], dtype=float),
        covariance=np.eye(4) * noise.initial_variance,
        last_time=float(time),
    )


def _check_measurement(meas: Tuple[float, float], time: float) -> None:
    if len(meas) != 2 or not all(math.isfinite(v) for v in meas) or not math.isfinite(time):
        raise MeasurementError(f"Measurement {meas} at time {time} is not finite.")


def kf_update(
    track: TrackState,
    meas: Tuple[float, float],
    time: float,
    noise: Optional[FilterConfig] = None,
) -> TrackState:
    """
    Predict the track forward to `time` and correct it with a position fix.

    Args:
        track: Current estimate.
        meas: Measured (x, y) in meters.
        time: Measurement time in seconds; must be after track.last_time.
        noise: Process (sigma_a) and measurement (sigma_p) noise.

    Returns:
        The updated TrackState.
    """
    noise = noise or FilterConfig()
    _check_measurement(meas, time)
    if not time > track.last_time:
        raise NonMonotonicTimeError(
            f"Measurement time {time} does not advance past {track.last_time}."
        )

    dt = time - track.last_time
    F = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    q = noise.process_sigma ** 2
    Q = q * np.array([[dt ** 4 / 4, 0.0, dt ** 3 / 2, 0.0],
                      [0.0, dt ** 4 / 4, 0.0, dt ** 3 / 2],
                      [dt ** 3 / 2, 0.0, dt ** 2, 0.0],
                      [0.0, dt ** 3 / 2, 0.0, dt ** 2]])
    R = np.eye(2) * noise.measurement_sigma ** 2

    # predict
    x = F @ track.mean
    P = F @ track.covariance @ F.T + Q

    # update
    y = np.asarray(meas, dtype=float) - H @ x
    S = H @ P @ H.T + R
    try:
        K = np.linalg.solve(S, H @ P).T
    except np.linalg.LinAlgError:
        K = P @ H.T @ np.linalg.pinv(S)
    x = x + K @ y
    I_KH = np.eye(4) - K @ H
    P = I_KH @ P @ I_KH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)

    return TrackState(mean=x, covariance=P, last_time=float(time))


class TurnEventDetector:
    """
    Emits one ObservationEvent per completed change of velocity direction.

    The detector keeps the last `settle_samples` usable velocity estimates.
    The window is settled when its heading changes by less than `settle_rate`
    from first to last sample. Each settled window is compared with the
    reference heading, the direction of the summed velocity since the last
    event. A difference above `trigger_angle` is a turn event and restarts the
    reference from the window; a smaller one is folded into the reference, so
    every turn is measured from one settled heading to the next.

    Samples slower than `min_speed`, or whose velocity is too uncertain, carry
    no usable heading. Reaching such a sample (the agent stopped) or the end of
    the stream judges a window that never settled, provided it holds at least
    MIN_PARTIAL_SAMPLES samples. At the end of the stream only the newest
    MIN_PARTIAL_SAMPLES samples are judged.
    """

    def __init__(self, config: Optional[QuantizerConfig] = None):
        self.config = config or QuantizerConfig()
        self.config.validate()
        self.reset()

    def reset(self) -> None:
        self._last_time: Optional[float] = None
        self._reference: Optional[np.ndarray] = None   # summed velocity since the last event
        # (time, unwrapped heading in degrees, velocity)
        self._window: Deque[Tuple[float, float, np.ndarray]] = deque(maxlen=self.config.settle_samples)
        self._unjudged = False

    def _usable(self, track: TrackState) -> bool:
        velocity_sigma = math.sqrt(max(track.covariance[2, 2], track.covariance[3, 3], 0.0))
        return track.speed >= self.config.min_speed and velocity_sigma <= self.config.max_velocity_sigma

    def _settled(self) -> bool:
        if len(self._window) < self.config.settle_samples:
            return False
        (start_time, start_heading, _), (end_time, end_heading, _) = self._window[0], self._window[-1]
        elapsed = end_time - start_time
        return elapsed > 0 and abs(end_heading - start_heading) / elapsed < self.config.settle_rate

    def _window_velocity(self, newest: Optional[int] = None) -> np.ndarray:
        samples = list(self._window)[-newest:] if newest else self._window
        return np.sum([velocity for _, _, velocity in samples], axis=0)

    def _judge(self, time: float, window: np.ndarray, folded: np.ndarray) -> Optional[ObservationEvent]:
        if self._reference is None:
            self._reference = window
            return None
        turn = wrap_degrees(_direction(window) - _direction(self._reference))
        if abs(turn) <= self.config.trigger_angle:
            self._reference = self._reference + folded
            return None
        self._reference = window
        event = ObservationEvent(
            timestamp=time,
            symbol=quantize_turn(turn, self.config.n_bins),
            turn_angle=turn,
        )
        logger.debug("Turn event at t=%.2fs: %+.1f deg -> symbol %d", time, turn, event.symbol)
        return event

    def _judge_unsettled(self, time: float, newest: Optional[int] = None) -> Optional[ObservationEvent]:
        if not self._unjudged or len(self._window) < MIN_PARTIAL_SAMPLES:
            return None
        window = self._window_velocity(newest)
        return self._judge(time, window, window)

    def update(self, track: TrackState) -> Optional[ObservationEvent]:
        """Feed one track estimate; return an event when a turn completes."""
        if not (math.isfinite(track.vx) and math.isfinite(track.vy)):
            raise MeasurementError(f"Track velocity ({track.vx}, {track.vy}) is not finite.")
        time = track.last_time
        self._last_time = time

        if not self._usable(track):
            event = self._judge_unsettled(time)
            self._window.clear()
            self._unjudged = False
            return event

        velocity = np.array([track.vx, track.vy])
        heading = math.degrees(track.heading)
        if self._window:
            previous = self._window[-1][1]
            heading = previous + wrap_degrees(heading - previous)
        self._window.append((time, heading, velocity))

        if not self._settled():
            self._unjudged = True
            return None
        self._unjudged = False
        return self._judge(time, self._window_velocity(), velocity)

    def flush(self) -> Optional[ObservationEvent]:
        """End of stream: judge the newest samples of a window that never settled."""
        if self._last_time is None:
            return None
        # the older samples may still predate the final turn
        event = self._judge_unsettled(self._last_time, newest=MIN_PARTIAL_SAMPLES)
        self._unjudged = False
        return event


def _direction(velocity: np.ndarray) -> float:
    return math.degrees(math.atan2(velocity[1], velocity[0]))


def detect_event(detector: TurnEventDetector, track: TrackState) -> Optional[ObservationEvent]:
    """Functional form of TurnEventDetector.update."""
    return detector.update(track)


class PerceptionPipeline:
    """Position fixes in, turn events out; one pipeline per observed agent."""

    def __init__(self, filter_config: Optional[FilterConfig] = None,
                 quantizer_config: Optional[QuantizerConfig] = None):
        self.filter_config = filter_config or FilterConfig()
        self.filter_config.validate()
        self.detector = TurnEventDetector(quantizer_config)
        self.track: Optional[TrackState] = None

    def push(self, time: float, x: float, y: float) -> Optional[ObservationEvent]:
        if self.track is None:
            self.track = kf_init(x, y, time, self.filter_config)
            return None
        self.track = kf_update(self.track, (x, y), time, self.filter_config)
        return self.detector.update(self.track)

    def finish(self) -> Optional[ObservationEvent]:
        return self.detector.flush()


def track_positions(
    samples: Iterable[Tuple[float, float, float]],
    filter_config: Optional[FilterConfig] = None,
    quantizer_config: Optional[QuantizerConfig] = None,
) -> List[ObservationEvent]:
    """Run a whole (t, x, y) stream through the filter and event detector."""
    pipeline = PerceptionPipeline(filter_config, quantizer_config)
    events = []
    for time, x, y in samples:
        event = pipeline.push(float(time), float(x), float(y))
        if event is not None:
            events.append(event)
    last = pipeline.finish()
    if last is not None:
        events.append(last)
    return events
