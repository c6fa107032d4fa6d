#!/usr/bin/env python3
"""
Example usage of behavior-hmm.

Trains two behaviors on a handful of simulated runs, then watches a fresh
rectangle run and prints the recognizer's scores after every turn event.
"""

import sys

from behavior_hmm import BehaviorSet, RunConfig, TEMPLATES
from behavior_hmm.errors import BehaviorHmmError
from behavior_hmm.harness import train_behavior, training_sequences
from behavior_hmm.perception import track_positions
from behavior_hmm.simulator import draw_run_config, simulate_behavior


def main():
    """Main example function."""
    print("behavior-hmm example")
    print("=" * 50)

    try:
        behaviors = []
        for name in ("rectangle", "hourglass"):
            runs = [simulate_behavior(name, draw_run_config(seed)) for seed in range(10)]
            behavior, result = train_behavior(name, training_sequences(runs))
            print(f"Trained {name}: {result.iterations} iterations, "
                  f"log-likelihood {result.initial_log_likelihood:.2f} -> {result.final_log_likelihood:.2f}")
            behaviors.append(behavior)

        config = draw_run_config(1000, RunConfig())
        run = simulate_behavior("rectangle", config)
        print(f"\nObserving a {config.direction} rectangle, scale {config.scale:.2f}, "
              f"{len(TEMPLATES['rectangle'].turn_events)} turns")
        session = BehaviorSet(behaviors).new_session()
        for event in track_positions(run.measurements):
            report = session.step(event)
            scores = "  ".join(f"{n}={v:.3f}" for n, v in report.likelihood_map().items())
            print(f"  t={report.t} ({run.percent_executed(report.timestamp):.0%} done) "
                  f"sym={event.symbol}  {scores}  -> {report.argmax_behavior}")

    except BehaviorHmmError as e:
        print(f"Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
