"""Test efficiency aggregates, epoch metrics, and the master objective.

:author: Shay Hill
:created: 2025-02-25
"""

from decimal import Decimal
from typing import Any

import pytest

from intralayer_sim.errors import ZeroCapital
from intralayer_sim.event_log import EventLog
from intralayer_sim.metrics import (
    CSV_COLUMNS,
    ObjectivePoint,
    aggregate_ke,
    agent_capital_efficiency,
    epoch_metrics,
    master_objective,
    replay,
)

HEADER: dict[str, Any] = {
    "kappa": "1",
    "path_exponent": "1.5",
    "output_coefficient": "0.1",
    "beta": ["0.5"],
}


def _epoch(log: EventLog, u: int, *, r: str = "10", gamma: str = "12") -> None:
    """One epoch's records: four agents, one of everything."""
    _ = log.append(u, 0, "epoch_open", {"n_agents": 4})
    _ = log.append(
        u,
        0,
        "message",
        {
            "src": "alice",
            "dst": "sol",
            "needed_at": "1",
            "delivered_at": "3",
            "required": ["a", "b"],
            "delivered": ["a"],
            "channel": "c",
        },
    )
    _ = log.append(u, 0, "transfer", {"value": "100", "ce": "50", "cost": "2"})
    _ = log.append(u, 0, "conversion", {"value": "300", "ce": "100", "cost": "3"})
    _ = log.append(u, 0, "conversion", {"value": "0", "ce": None, "cost": "0"})
    _ = log.append(u, 0, "fee", {"agent": "alice", "service": "DC", "gross": "1", "credit": "0"})
    _ = log.append(u, 0, "fee", {"agent": "alice", "service": "VT", "gross": "2", "credit": "0"})
    _ = log.append(u, 0, "path", {"src": "alice", "dst": "bob", "value": "100"})
    _ = log.append(u, 0, "ufc_round", {"status": "settled", "savings": "4"})
    _ = log.append(u, 0, "ufc_round", {"status": "deferred", "savings": "0"})
    _ = log.append(u, 1, "agent_capital", {"agent": "alice", "capital": "50"})
    _ = log.append(u, 1, "agent_capital", {"agent": "bob", "capital": "50"})
    _ = log.append(u, 1, "fiscal_close", {"NF": "3", "B": "1", "R": r, "gamma": gamma})


class TestAggregates:
    def test_agent_ke(self):
        assert agent_capital_efficiency([Decimal(1), Decimal(4)], Decimal(10)) == Decimal("0.5")

    def test_agent_ke_needs_capital(self):
        with pytest.raises(ZeroCapital):
            _ = agent_capital_efficiency([Decimal(1)], Decimal(0))

    def test_aggregate_ke_is_ratio_of_sums(self):
        records = [(Decimal(1), Decimal(1)), (Decimal(0), Decimal(9))]
        assert aggregate_ke(records) == Decimal("0.1")

    def test_master_objective(self):
        points = [
            ObjectivePoint(Decimal(10), Decimal(4), Decimal(20), Decimal(10)),
            ObjectivePoint(Decimal(5), Decimal(5), Decimal(0), Decimal(10)),
        ]
        betas = (Decimal("0.5"), Decimal(1))
        assert master_objective(points, betas) == (6 - 5) + (0 + 10)

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            _ = master_objective([], [Decimal(-1)])


class TestEpochMetrics:
    def test_every_column(self):
        log = EventLog()
        _epoch(log, 1)
        row, point = epoch_metrics(1, log.records, HEADER)
        assert row.n_agents == 4
        assert row.n_paths == 8
        assert (row.psi, row.lag) == (Decimal("0.5"), 2)
        assert (row.ce_vt, row.ce_vc) == (50, 100)
        assert row.ke == Decimal("0.1")
        assert row.savings == 4
        assert point == ObjectivePoint(Decimal(10), Decimal(6), Decimal(10), Decimal(12))
        assert row.objective == 5
        assert len(row.as_row()) == len(CSV_COLUMNS)

    def test_empty_aggregates_are_blank(self):
        log = EventLog()
        _ = log.append(1, 0, "epoch_open", {"n_agents": 0})
        _ = log.append(1, 0, "fiscal_close", {"NF": "0", "B": "0", "R": "5", "gamma": "0"})
        row, _ = epoch_metrics(1, log.records, HEADER)
        assert (row.lag, row.ce_vt, row.ce_vc, row.ke) == (None, None, None, None)
        assert row.as_row()[CSV_COLUMNS.index("d")] == ""
        assert row.objective == Decimal("-2.5")

    def test_replay_accumulates_objective(self):
        log = EventLog()
        _ = log.append(0, 0, "scenario", HEADER)
        _epoch(log, 1)
        _epoch(log, 2, r="12")
        rows = replay(log.records)
        assert [r.epoch for r in rows] == [1, 2]
        assert [r.objective for r in rows] == [5, 9]

    def test_replay_skips_open_epoch(self):
        log = EventLog()
        _ = log.append(0, 0, "scenario", HEADER)
        _epoch(log, 1)
        _ = log.append(2, 0, "epoch_open", {"n_agents": 4})
        assert len(replay(log.records)) == 1

    def test_replay_of_nothing(self):
        assert replay([]) == []
