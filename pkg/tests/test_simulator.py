"""
Tests for behavior templates, path construction and run simulation.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest

from behavior_hmm.config import BEHAVIOR_NAMES, RunConfig
from behavior_hmm.errors import ConfigurationError, UnknownBehaviorError, ValidationError
from behavior_hmm.simulator import (
    TEMPLATES,
    BehaviorTemplate,
    build_behavior_path,
    draw_run_config,
    geometric_turns,
    get_template,
    simulate_behavior,
    simulate_run,
    validate_template,
)

PERIMETERS = {
    "rectangle": 6.0,
    "triangle": 3.0 + 1.5 * math.sqrt(2.0),
    "convex_box": 6.0,
    "concave_box": 10.5,
    "trapezoid": 4.2 + 2.0 * math.hypot(0.7, 0.7),
    "hourglass": 4.0 + 2.0 * math.hypot(2.0, 0.4),
}

EXPECTED_SYMBOLS = {
    "rectangle": [2, 2, 2, 2],
    "triangle": [3, 2, 3],
    "convex_box": [1, 1, 1, 1, 1, 1],
    "concave_box": [6, 2, 2, 2, 2, 2, 2, 6],
    "trapezoid": [1, 3, 3, 1],
    "hourglass": [4, 4, 4, 4],
}


class TestTemplates:

    def test_every_behavior_has_a_template(self):
        assert sorted(TEMPLATES) == sorted(BEHAVIOR_NAMES)

    @pytest.mark.parametrize("name", BEHAVIOR_NAMES)
    def test_declared_turns_match_geometry(self, name):
        validate_template(get_template(name))

    @pytest.mark.parametrize("name", BEHAVIOR_NAMES)
    def test_expected_symbols(self, name):
        template = get_template(name)
        assert template.expected_symbols(8, "ccw") == EXPECTED_SYMBOLS[name]
        assert template.expected_symbols(8, "cw") == [(8 - s) % 8 for s in reversed(EXPECTED_SYMBOLS[name])]

    @pytest.mark.parametrize("name", BEHAVIOR_NAMES)
    def test_turns_clear_the_bin_edges(self, name):
        for turn in get_template(name).turn_events:
            offset = (turn - 22.5) % 45.0
            assert min(offset, 45.0 - offset) >= 7.5 - 1e-9

    def test_first_symbols_tell_the_bowtie_from_the_triangle(self):
        assert get_template("hourglass").expected_symbols(8, "ccw")[0] == 4
        assert get_template("hourglass").expected_symbols(8, "cw")[0] == 4
        assert get_template("triangle").expected_symbols(8, "ccw")[0] == 3

    def test_event_counts(self):
        counts = {name: get_template(name).n_events for name in BEHAVIOR_NAMES}
        assert counts == {"rectangle": 4, "triangle": 3, "convex_box": 6,
                          "concave_box": 8, "trapezoid": 4, "hourglass": 4}

    def test_unknown_behavior(self):
        with pytest.raises(UnknownBehaviorError) as excinfo:
            get_template("circle")
        assert "rectangle" in str(excinfo.value)

    def test_inconsistent_template_is_rejected(self):
        bad = BehaviorTemplate("bad", ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)), (90.0, 90.0, 90.0, 45.0))
        with pytest.raises(ValidationError):
            validate_template(bad)

    def test_geometric_turns_of_a_square(self):
        npt.assert_allclose(geometric_turns([(0, 0), (1, 0), (1, 1), (0, 1)]), [90.0] * 4)


class TestBuildBehaviorPath:

    @pytest.mark.parametrize("name", BEHAVIOR_NAMES)
    def test_path_length_is_scaled_perimeter(self, name):
        for scale in (0.5, 1.0, 1.5):
            path = build_behavior_path(get_template(name), RunConfig(scale=scale, initial_heading=1.0))
            assert path.path_length == pytest.approx(PERIMETERS[name] * scale)

    def test_closed_loop_and_centered(self):
        config = RunConfig(center=(2.0, -1.0), initial_heading=0.7)
        path = build_behavior_path(get_template("rectangle"), config)
        npt.assert_allclose(path.points[0], path.points[-1])
        npt.assert_allclose(path.points[1:-1].mean(axis=0), [2.0, -1.0], atol=1e-12)

    def test_clockwise_reverses_and_mirrors(self):
        template = get_template("concave_box")
        ccw = build_behavior_path(template, RunConfig(direction="ccw"))
        cw = build_behavior_path(template, RunConfig(direction="cw"))
        npt.assert_allclose(cw.points[1:-1], ccw.points[-2:0:-1])
        assert cw.turn_events == tuple(-t for t in reversed(ccw.turn_events))
        assert cw.expected_symbols() == [2, 6, 6, 6, 6, 6, 6, 2]
        assert cw.path_length == pytest.approx(ccw.path_length)

    def test_scale_out_of_range(self):
        with pytest.raises(ConfigurationError):
            build_behavior_path(get_template("rectangle"), RunConfig(scale=2.0))


class TestSimulateRun:

    def test_deterministic(self):
        config = RunConfig(seed=11, scale=1.2, initial_heading=2.0, direction="cw")
        first = simulate_behavior("hourglass", config)
        second = simulate_behavior("hourglass", config)
        npt.assert_array_equal(first.measurements, second.measurements)
        npt.assert_array_equal(first.ground_truth, second.ground_truth)

    def test_seed_changes_noise_only(self):
        a = simulate_behavior("triangle", RunConfig(seed=1))
        b = simulate_behavior("triangle", RunConfig(seed=2))
        npt.assert_array_equal(a.ground_truth, b.ground_truth)
        assert not np.array_equal(a.measurements, b.measurements)

    def test_measurements_are_sampled_at_the_rate(self):
        run = simulate_behavior("rectangle", RunConfig(position_noise_sigma=0.0, detection_range=math.inf))
        times = run.measurements[:, 0]
        assert np.all(np.diff(times) > 0)
        npt.assert_allclose(np.diff(times), 0.1)
        npt.assert_allclose(run.measurements[:, 1:], run.ground_truth[:, 1:3])

    def test_timing_of_drive_and_pivots(self):
        run = simulate_behavior("rectangle", RunConfig(position_noise_sigma=0.0, detection_range=math.inf))
        # 6 m at 0.3 m/s plus four one-second pivots
        assert run.ground_truth[-1, 0] == pytest.approx(24.0, abs=0.1)
        assert run.ground_truth[-1, 4] == pytest.approx(6.0, abs=0.05)
        first = 0.5 / 0.3
        expected = [first, first + 1.0 + 2.0 / 0.3, first + 2.0 + 3.0 / 0.3, first + 3.0 + 5.0 / 0.3]
        assert [e.time for e in run.true_turn_events] == pytest.approx(expected)

    def test_noise_has_the_configured_spread(self):
        run = simulate_behavior("convex_box", RunConfig(seed=3, position_noise_sigma=0.05, detection_range=math.inf))
        residuals = run.measurements[:, 1:] - run.ground_truth[:, 1:3]
        assert residuals.std() == pytest.approx(0.05, rel=0.15)

    def test_out_of_range_samples_are_dropped(self):
        config = RunConfig(position_noise_sigma=0.0, detection_range=3.0, center=(3.0, 0.0))
        run = simulate_behavior("rectangle", config)
        assert 0 < len(run.measurements) < len(run.ground_truth)
        distances = np.hypot(run.measurements[:, 1], run.measurements[:, 2])
        assert distances.max() <= 3.0

    def test_percent_executed(self):
        run = simulate_behavior("trapezoid", RunConfig())
        assert run.percent_executed(0.0) == 0.0
        assert run.percent_executed(run.ground_truth[-1, 0]) == pytest.approx(1.0, abs=0.01)
        values = [run.percent_executed(t) for t in run.ground_truth[:, 0]]
        assert all(later >= earlier for earlier, later in zip(values, values[1:]))

    def test_true_events_carry_symbols(self):
        run = simulate_behavior("hourglass", RunConfig(direction="ccw"))
        assert run.expected_symbols() == EXPECTED_SYMBOLS["hourglass"]

    def test_invalid_config(self):
        path = build_behavior_path(get_template("rectangle"), RunConfig())
        with pytest.raises(ConfigurationError):
            simulate_run(path, RunConfig(speed=0.0))


class TestDrawRunConfig:

    def test_ranges_and_determinism(self):
        configs = [draw_run_config(seed) for seed in range(200)]
        assert all(0.5 <= c.scale <= 1.5 for c in configs)
        assert all(0.0 <= c.initial_heading < 2.0 * math.pi for c in configs)
        directions = {c.direction for c in configs}
        assert directions == {"ccw", "cw"}
        assert draw_run_config(17) == draw_run_config(17)

    def test_base_fields_are_kept(self):
        base = RunConfig(speed=0.5, position_noise_sigma=0.0)
        config = draw_run_config(4, base)
        assert config.seed == 4
        assert config.speed == 0.5
        assert config.position_noise_sigma == 0.0
