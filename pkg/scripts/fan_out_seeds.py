"""Run one scenario under many seeds and print per-epoch means.

Each seed is an independent run. Seeds move only the random streams (prices,
channels, activity), so the spread across seeds is the spread the scenario's
randomness allows.

    python scripts/fan_out_seeds.py src/intralayer_sim/resources/reference.yaml 16

:author: Shay Hill
:created: 2025-02-21
"""

import sys
from pathlib import Path

import numpy as np
import numpy.typing as npt

from intralayer_sim.config import load_scenario, with_overrides
from intralayer_sim.engine import run
from intralayer_sim.globs import REFERENCE_SCENARIO

_COLUMNS = ("equity", "gamma", "nf", "b", "psi", "objective")


def fan_out(path: Path, n_seeds: int) -> dict[str, npt.NDArray[np.float64]]:
    """Metric columns of every seed, shaped (n_seeds, horizon).

    The float conversion happens here, after each run, so the runs themselves
    stay exact.
    """
    base = load_scenario(path)
    table = {name: np.zeros((n_seeds, base.horizon)) for name in _COLUMNS}
    for i in range(n_seeds):
        result = run(with_overrides(base, seed=base.seed + i))
        for name, column in table.items():
            column[i] = [float(getattr(row, name)) for row in result.metrics]
    return table


def print_summary(table: dict[str, npt.NDArray[np.float64]]) -> None:
    header = "epoch " + " ".join(f"{name:>22}" for name in _COLUMNS)
    print(header)
    horizon = next(iter(table.values())).shape[1]
    for u in range(horizon):
        cells = [f"{table[n][:, u].mean():>12.4f} ±{table[n][:, u].std():>8.4f}" for n in _COLUMNS]
        print(f"{u + 1:>5} " + " ".join(cells))


if __name__ == "__main__":
    scenario = Path(sys.argv[1]) if len(sys.argv) > 1 else REFERENCE_SCENARIO
    seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    print_summary(fan_out(scenario, seeds))
