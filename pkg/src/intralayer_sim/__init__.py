"""Import the run surface into the package namespace.

:author: Shay Hill
:created: 2025-02-03
"""

from intralayer_sim.config import ScenarioConfig, load_scenario, with_overrides
from intralayer_sim.engine import (
    RunResult,
    advance_epoch,
    genesis,
    restore,
    run,
    run_until,
    snapshot,
    state_digest,
)

__all__ = [
    "RunResult",
    "ScenarioConfig",
    "advance_epoch",
    "genesis",
    "load_scenario",
    "restore",
    "run",
    "run_until",
    "snapshot",
    "state_digest",
    "with_overrides",
]
