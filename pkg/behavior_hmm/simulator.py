"""
Desk-scale simulator for the six polygonal behaviors.

An agent drives each polygon edge in a straight line at constant speed and
pivots in place at every vertex with a bounded turn rate. Runs start at the
midpoint of the edge that closes the loop, so every vertex contributes exactly
one turn and the path length equals the perimeter. Ground-truth poses are
sampled at a fixed rate; measurements add Gaussian position noise and drop
samples the observer cannot see.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import BEHAVIOR_NAMES, RunConfig
from .errors import UnknownBehaviorError, ValidationError
from .perception import quantize_turn, wrap_degrees

logger = logging.getLogger(__name__)

GEOMETRY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BehaviorTemplate:
    """Unit-scale polygon, listed counter-clockwise from the first vertex reached."""
    name: str
    waypoints: Tuple[Tuple[float, float], ...]
    turn_events: Tuple[float, ...]  # signed degrees, positive = left

    @property
    def n_events(self) -> int:
        return len(self.turn_events)

    def start_point(self) -> Tuple[float, float]:
        (x0, y0), (x1, y1) = self.waypoints[-1], self.waypoints[0]
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)

    def expected_symbols(self, n_bins: int = 8, direction: str = "ccw") -> List[int]:
        turns = self.turn_events if direction == "ccw" else [-t for t in reversed(self.turn_events)]
        return [quantize_turn(t, n_bins) for t in turns]


HOURGLASS_TURN = 180.0 - math.degrees(math.atan2(0.4, 2.0))


def _hexagon() -> Tuple[Tuple[float, float], ...]:
    return tuple(
        (math.cos(math.radians(60.0 * k)), math.sin(math.radians(60.0 * k))) for k in range(6)
    )


TEMPLATES: Dict[str, BehaviorTemplate] = {
    "rectangle": BehaviorTemplate(
        "rectangle",
        ((0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)),
        (90.0, 90.0, 90.0, 90.0),
    ),
    "triangle": BehaviorTemplate(
        "triangle",
        ((0.0, 1.5), (0.0, 0.0), (1.5, 0.0)),
        (135.0, 90.0, 135.0),
    ),
    "convex_box": BehaviorTemplate(
        "convex_box",
        _hexagon(),
        (60.0,) * 6,
    ),
    "concave_box": BehaviorTemplate(
        "concave_box",
        ((0.75, 0.75), (0.75, 1.5), (0.0, 1.5), (0.0, 0.0),
         (3.0, 0.0), (3.0, 1.5), (2.25, 1.5), (2.25, 0.75)),
        (-90.0, 90.0, 90.0, 90.0, 90.0, 90.0, 90.0, -90.0),
    ),
    "trapezoid": BehaviorTemplate(
        "trapezoid",
        ((0.7, 0.7), (0.0, 0.0), (2.8, 0.0), (2.1, 0.7)),
        (45.0, 135.0, 135.0, 45.0),
    ),
    "hourglass": BehaviorTemplate(
        "hourglass",
        ((0.0, 0.0), (2.0, 0.0), (0.0, 0.4), (2.0, 0.4)),
        (HOURGLASS_TURN, HOURGLASS_TURN, -HOURGLASS_TURN, -HOURGLASS_TURN),
    ),
}


def get_template(name: str) -> BehaviorTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise UnknownBehaviorError(name, BEHAVIOR_NAMES)


def _segment_heading(p: Sequence[float], q: Sequence[float]) -> float:
    return math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))


def geometric_turns(waypoints: Sequence[Sequence[float]]) -> List[float]:
    """Exterior turning angle (degrees) at every vertex of a closed loop."""
    n = len(waypoints)
    turns = []
    for i in range(n):
        incoming = _segment_heading(waypoints[i - 1], waypoints[i])
        outgoing = _segment_heading(waypoints[i], waypoints[(i + 1) % n])
        turns.append(wrap_degrees(outgoing - incoming))
    return turns


def validate_template(template: BehaviorTemplate) -> None:
    """Raise ValidationError if the template's turns do not match its geometry."""
    points = template.waypoints
    if len(points) < 3:
        raise ValidationError(f"Template '{template.name}' needs at least three waypoints.")
    for i in range(len(points)):
        p, q = points[i - 1], points[i]
        if math.hypot(q[0] - p[0], q[1] - p[1]) <= GEOMETRY_TOLERANCE:
            raise ValidationError(f"Template '{template.name}' repeats waypoint {i}.")
    if len(template.turn_events) != len(points):
        raise ValidationError(f"Template '{template.name}' needs one turn per waypoint.")
    for i, (declared, actual) in enumerate(zip(template.turn_events, geometric_turns(points))):
        if abs(declared - actual) > GEOMETRY_TOLERANCE:
            raise ValidationError(
                f"Template '{template.name}' vertex {i}: declared turn {declared} but geometry gives {actual}."
            )


@dataclass(frozen=True)
class BehaviorPath:
    """A transformed, closed waypoint loop ready to drive."""
    name: str
    points: np.ndarray              # (K + 2, 2): start, vertices..., start
    turn_events: Tuple[float, ...]  # signed degrees in driving order
    direction: str

    @property
    def path_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))

    def expected_symbols(self, n_bins: int = 8) -> List[int]:
        return [quantize_turn(t, n_bins) for t in self.turn_events]


def build_behavior_path(template: BehaviorTemplate, config: RunConfig) -> BehaviorPath:
    """
    Scale, rotate and place a template; reverse it for clockwise runs.

    The template is centered on its vertex centroid, scaled by config.scale,
    rotated by config.initial_heading and moved to config.center. Under CW the
    vertex order is reversed and turn angles are negated.
    """
    config.validate()
    vertices = np.array(template.waypoints, dtype=float)
    start = np.array(template.start_point(), dtype=float)
    turns = list(template.turn_events)
    if config.direction == "cw":
        vertices = vertices[::-1]
        turns = [-t for t in reversed(turns)]

    centroid = np.array(template.waypoints, dtype=float).mean(axis=0)
    c, s = math.cos(config.initial_heading), math.sin(config.initial_heading)
    rotation = np.array([[c, -s], [s, c]])
    loop = np.vstack([start, vertices, start])
    points = (loop - centroid) * config.scale @ rotation.T + np.asarray(config.center, dtype=float)
    return BehaviorPath(name=template.name, points=points, turn_events=tuple(turns),
                        direction=config.direction)


@dataclass(frozen=True)
class TrueTurnEvent:
    time: float   # seconds, when the pivot at the vertex begins
    angle: float  # signed degrees
    symbol: int


@dataclass
class SimRun:
    """One simulated execution: measurements plus the ground truth behind them."""
    behavior: str
    config: RunConfig
    measurements: np.ndarray   # (K, 3): t, x, y
    ground_truth: np.ndarray   # (S, 5): t, x, y, heading (rad), distance traveled
    true_turn_events: List[TrueTurnEvent] = field(default_factory=list)
    path_length: float = 0.0

    def expected_symbols(self) -> List[int]:
        return [e.symbol for e in self.true_turn_events]

    def distance_at(self, time: float) -> float:
        """Ground-truth distance traveled at `time`, interpolated between samples."""
        return float(np.interp(time, self.ground_truth[:, 0], self.ground_truth[:, 4]))

    def percent_executed(self, time: float) -> float:
        return min(max(self.distance_at(time) / self.path_length, 0.0), 1.0)


@dataclass(frozen=True)
class _Primitive:
    kind: str          # "line" or "pivot"
    start_time: float
    duration: float
    origin: Tuple[float, float]
    heading: float     # radians at the start of the primitive
    rate: float        # m/s for lines, rad/s for pivots
    distance: float    # distance traveled before this primitive


def _plan(path: BehaviorPath, speed: float, turn_rate: float) -> Tuple[List[_Primitive], List[float]]:
    """Alternate line and pivot primitives along the path; return them and the vertex times."""
    primitives: List[_Primitive] = []
    vertex_times: List[float] = []
    time = 0.0
    distance = 0.0
    omega = math.radians(turn_rate)
    points = path.points
    heading = math.atan2(points[1, 1] - points[0, 1], points[1, 0] - points[0, 0])

    for i in range(len(points) - 1):
        if i > 0:
            angle = math.radians(path.turn_events[i - 1])
            duration = abs(angle) / omega
            vertex_times.append(time)
            primitives.append(_Primitive("pivot", time, duration, tuple(points[i]), heading,
                                         math.copysign(omega, angle), distance))
            time += duration
            heading += angle
        length = float(math.hypot(*(points[i + 1] - points[i])))
        primitives.append(_Primitive("line", time, length / speed, tuple(points[i]), heading,
                                     speed, distance))
        time += length / speed
        distance += length
    return primitives, vertex_times


def _pose(primitive: _Primitive, time: float) -> Tuple[float, float, float, float]:
    elapsed = min(max(time - primitive.start_time, 0.0), primitive.duration)
    x, y = primitive.origin
    if primitive.kind == "pivot":
        return x, y, primitive.heading + primitive.rate * elapsed, primitive.distance
    travelled = primitive.rate * elapsed
    return (
        x + travelled * math.cos(primitive.heading),
        y + travelled * math.sin(primitive.heading),
        primitive.heading,
        primitive.distance + travelled,
    )


def simulate_run(path: BehaviorPath, config: RunConfig, n_bins: int = 8) -> SimRun:
    """
    Drive the path and sample noisy, range-gated position measurements.

    Args:
        path: Output of build_behavior_path.
        config: Speed, sampling, noise, range and seed.
        n_bins: Quantizer bins used to label the true turn events.

    Returns:
        SimRun; identical inputs give identical output.
    """
    config.validate()
    if len(path.points) < 3 or path.path_length <= 0.0:
        raise ValidationError(f"Path '{path.name}' is empty.")

    primitives, vertex_times = _plan(path, config.speed, config.turn_rate)
    end_time = primitives[-1].start_time + primitives[-1].duration
    times = np.arange(int(math.floor(end_time * config.sample_rate)) + 1) / config.sample_rate

    truth = np.empty((times.size, 5))
    starts = np.array([p.start_time for p in primitives])
    for k, t in enumerate(times):
        index = max(int(np.searchsorted(starts, t, side="right")) - 1, 0)
        x, y, heading, distance = _pose(primitives[index], t)
        truth[k] = (t, x, y, math.atan2(math.sin(heading), math.cos(heading)), distance)

    rng = np.random.default_rng([config.seed, 1])
    noise = rng.normal(0.0, config.position_noise_sigma, size=(times.size, 2)) \
        if config.position_noise_sigma > 0 else np.zeros((times.size, 2))
    measured = truth[:, 1:3] + noise

    observer = np.asarray(config.observer_position, dtype=float)
    visible = np.hypot(*(truth[:, 1:3] - observer).T) <= config.detection_range
    measurements = np.column_stack([times, measured])[visible]
    dropped = int(times.size - visible.sum())
    if dropped:
        logger.debug("Run '%s' seed %d: %d of %d samples out of range", path.name, config.seed,
                     dropped, times.size)

    events = [
        TrueTurnEvent(time=t, angle=angle, symbol=quantize_turn(angle, n_bins))
        for t, angle in zip(vertex_times, path.turn_events)
    ]
    return SimRun(
        behavior=path.name,
        config=config,
        measurements=measurements,
        ground_truth=truth,
        true_turn_events=events,
        path_length=path.path_length,
    )


def draw_run_config(seed: int, base: Optional[RunConfig] = None) -> RunConfig:
    """Draw scale in [0.5, 1.5], heading in [0, 2*pi) and direction from a seed."""
    base = base or RunConfig()
    rng = np.random.default_rng([seed, 0])
    scale = float(rng.uniform(0.5, 1.5))
    heading = float(rng.uniform(0.0, 2.0 * math.pi))
    direction = "cw" if rng.random() < 0.5 else "ccw"
    return RunConfig(
        seed=seed,
        scale=scale,
        initial_heading=heading,
        direction=direction,
        speed=base.speed,
        sample_rate=base.sample_rate,
        position_noise_sigma=base.position_noise_sigma,
        detection_range=base.detection_range,
        observer_position=base.observer_position,
        center=base.center,
        turn_rate=base.turn_rate,
    )


def simulate_behavior(name: str, config: RunConfig, n_bins: int = 8) -> SimRun:
    """Template lookup, path construction and simulation in one call."""
    return simulate_run(build_behavior_path(get_template(name), config), config, n_bins)
