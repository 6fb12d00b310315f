"""Rewrite the frozen metrics of the golden scenario.

Run after reviewing a change that moves the metrics on purpose.
tests/test_golden.py compares every later run to this file.

:author: Shay Hill
:created: 2025-02-27
"""

from pathlib import Path

from intralayer_sim.config import load_scenario
from intralayer_sim.engine import run
from intralayer_sim.report import write_metrics_csv

_RESOURCES = Path(__file__).parent.parent / "tests" / "resources"
_SCENARIO = _RESOURCES / "golden_scenario.yaml"
_FROZEN = _RESOURCES / "golden_metrics.csv"


if __name__ == "__main__":
    result = run(load_scenario(_SCENARIO))
    write_metrics_csv(result.metrics, _FROZEN)
    print(f"{_FROZEN}: {len(result.metrics)} epochs, log hash {result.log_hash}")
