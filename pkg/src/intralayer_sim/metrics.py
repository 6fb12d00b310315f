"""Efficiency aggregates and the master objective.

Epoch metrics are computed from event log records alone, so recomputing them
from a written log gives the streamed values exactly. Each epoch reads:

    epoch_open      number of active agents
    message         lag and discrepancy
    transfer        value, cost, and CE of value transfers
    conversion      value, cost, and CE of conversions
    fee             DC, PL, and KE fees, counted as path costs
    path            value moved between agents, the basis of economic output
    agent_capital   capital deployed per agent at the close
    ufc_round       cost savings of settled rounds
    fiscal_close    NF, B, R, and Gamma

and the run's "scenario" header for kappa, the path exponent, the output
coefficient, and the beta schedule.

:author: Shay Hill
:created: 2025-02-15
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import TYPE_CHECKING, Any, NamedTuple

from intralayer_sim.comms import MessageEvent, epoch_discrepancy, epoch_lag
from intralayer_sim.core import ZERO, quantize_metric, scheduled
from intralayer_sim.errors import NoVolume, ZeroCapital
from intralayer_sim.liquidity import aggregate_ce_vc, aggregate_ce_vt
from intralayer_sim.topology import path_count

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from intralayer_sim.event_log import EventRecord

CSV_COLUMNS = (
    "epoch",
    "N_a",
    "N_p",
    "psi",
    "d",
    "CE_VT",
    "CE_VC",
    "KE",
    "savings",
    "NF",
    "B",
    "R",
    "gamma",
    "objective",
)

# path costs beyond what transfer and conversion records carry
_COST_SERVICES = ("DC", "PL", "KE")


def agent_capital_efficiency(outputs: Sequence[Decimal], capital: Decimal) -> Decimal:
    """KE of one agent, the sum of its path outputs over its capital.

    :raise ZeroCapital: if capital is not positive

    >>> agent_capital_efficiency([Decimal(2), Decimal(3)], Decimal(10))
    Decimal('0.5')
    """
    if capital <= 0:
        msg = f"capital efficiency needs positive capital, got {capital}"
        raise ZeroCapital(msg)
    return sum(outputs, ZERO) / capital


def aggregate_ke(records: Iterable[tuple[Decimal, Decimal]]) -> Decimal:
    """Aggregate KE, total output over total capital (not a mean of ratios).

    :param records: (output, capital) per agent and epoch
    :raise ZeroCapital: if the capitals sum to zero
    """
    records = list(records)
    capital = sum((k for _, k in records), ZERO)
    if capital <= 0:
        msg = "no capital deployed"
        raise ZeroCapital(msg)
    return sum((e for e, _ in records), ZERO) / capital


class ObjectivePoint(NamedTuple):
    """One epoch of the master objective."""

    output: Decimal
    cost: Decimal
    equity: Decimal
    gamma: Decimal


def master_objective(trajectory: Sequence[ObjectivePoint], betas: Sequence[Decimal]) -> Decimal:
    """Sum over epochs of (O - C) - beta_u * (R - Gamma).

    :param trajectory: realized points, epoch 1 first
    :param betas: beta schedule, read like any per-epoch schedule
    """
    if any(b < 0 for b in betas):
        msg = f"beta weights must be non-negative: {list(betas)}"
        raise ValueError(msg)
    return sum(
        (
            p.output - p.cost - scheduled(betas, u) * (p.equity - p.gamma)
            for u, p in enumerate(trajectory, start=1)
        ),
        ZERO,
    )


# ===================================================================================
#   Epoch metrics
# ===================================================================================


@dataclass(frozen=True)
class EpochMetrics:
    """One CSV row. None marks an aggregate with nothing to aggregate."""

    epoch: int
    n_agents: int
    n_paths: Decimal
    psi: Decimal
    lag: Decimal | None
    ce_vt: Decimal | None
    ce_vc: Decimal | None
    ke: Decimal | None
    savings: Decimal
    nf: Decimal
    b: Decimal
    equity: Decimal
    gamma: Decimal
    objective: Decimal

    def as_row(self) -> list[str]:
        """Cells in CSV_COLUMNS order, metrics rounded to 12 digits."""

        def cell(value: Decimal | None) -> str:
            return "" if value is None else format(quantize_metric(value), "f")

        return [
            str(self.epoch),
            str(self.n_agents),
            cell(self.n_paths),
            cell(self.psi),
            cell(self.lag),
            cell(self.ce_vt),
            cell(self.ce_vc),
            cell(self.ke),
            cell(self.savings),
            cell(self.nf),
            cell(self.b),
            cell(self.equity),
            cell(self.gamma),
            cell(self.objective),
        ]


def _dec(value: Any) -> Decimal:
    return Decimal(value)


def _message(data: dict[str, Any]) -> MessageEvent:
    return MessageEvent(
        src=data["src"],
        dst=data["dst"],
        needed_at=_dec(data["needed_at"]),
        delivered_at=_dec(data["delivered_at"]),
        required=frozenset(data["required"]),
        delivered=frozenset(data["delivered"]),
        channel=data.get("channel", ""),
    )


def _or_none(records: list[tuple[Decimal, Decimal]], aggregate: Any) -> Decimal | None:
    try:
        return aggregate(records)
    except (NoVolume, ZeroCapital):
        return None


def epoch_metrics(
    epoch: int,
    records: Sequence[EventRecord],
    header: dict[str, Any],
    objective_before: Decimal = ZERO,
) -> tuple[EpochMetrics, ObjectivePoint]:
    """Compute one epoch's metrics from its records.

    :param epoch: the epoch
    :param records: every record of the epoch, in log order
    :param header: data of the run's "scenario" record
    :param objective_before: master objective through the previous epoch
    :return: the metrics, whose objective is cumulative, and the epoch's
        objective point
    """
    by_kind: dict[str, list[dict[str, Any]]] = {}
    for record in records:
        by_kind.setdefault(record.kind, []).append(record.data)

    opened = by_kind.get("epoch_open", [{"n_agents": 0}])
    n_agents = int(opened[0]["n_agents"])
    n_paths = path_count(_dec(header["kappa"]), _dec(header["path_exponent"]), n_agents)

    messages = [_message(d) for d in by_kind.get("message", [])]
    psi = epoch_discrepancy([m for m in messages if m.required])
    lag = epoch_lag(messages) if messages else None

    transfers = by_kind.get("transfer", [])
    conversions = [d for d in by_kind.get("conversion", []) if d["ce"] is not None]
    ce_vt = _or_none([(_dec(d["value"]), _dec(d["ce"])) for d in transfers], aggregate_ce_vt)
    ce_vc = _or_none([(_dec(d["value"]), _dec(d["ce"])) for d in conversions], aggregate_ce_vc)

    coefficient = _dec(header["output_coefficient"])
    outputs: dict[str, Decimal] = {}
    for d in by_kind.get("path", []):
        outputs[d["src"]] = outputs.get(d["src"], ZERO) + coefficient * _dec(d["value"])
    capital = [
        (outputs.get(d["agent"], ZERO), _dec(d["capital"]))
        for d in by_kind.get("agent_capital", [])
    ]
    ke = _or_none(capital, aggregate_ke)

    savings = sum(
        (_dec(d["savings"]) for d in by_kind.get("ufc_round", []) if d["status"] == "settled"),
        ZERO,
    )
    cost = sum((_dec(d["cost"]) for d in transfers), ZERO)
    cost += sum((_dec(d["cost"]) for d in by_kind.get("conversion", [])), ZERO)
    cost += sum(
        (_dec(d["gross"]) for d in by_kind.get("fee", []) if d["service"] in _COST_SERVICES),
        ZERO,
    )

    close = by_kind["fiscal_close"][0]
    point = ObjectivePoint(
        output=sum(outputs.values(), ZERO),
        cost=cost,
        equity=_dec(close["R"]),
        gamma=_dec(close["gamma"]),
    )
    betas = tuple(_dec(b) for b in header["beta"])
    term = point.output - point.cost - scheduled(betas, epoch) * (point.equity - point.gamma)

    metrics = EpochMetrics(
        epoch=epoch,
        n_agents=n_agents,
        n_paths=n_paths,
        psi=psi,
        lag=lag,
        ce_vt=ce_vt,
        ce_vc=ce_vc,
        ke=ke,
        savings=savings,
        nf=_dec(close["NF"]),
        b=_dec(close["B"]),
        equity=point.equity,
        gamma=point.gamma,
        objective=objective_before + term,
    )
    return metrics, point


def replay(records: Sequence[EventRecord]) -> list[EpochMetrics]:
    """Recompute every closed epoch's metrics from a full log.

    :param records: a run's records, header first. An empty log has no epochs.
    :return: one row per epoch with a fiscal close, in epoch order
    """
    if not records:
        return []
    header = next(r.data for r in records if r.kind == "scenario")
    grouped: dict[int, list[EventRecord]] = {}
    for record in records:
        if record.epoch >= 1:
            grouped.setdefault(record.epoch, []).append(record)

    rows: list[EpochMetrics] = []
    objective = ZERO
    for epoch, epoch_records in sorted(grouped.items()):
        if not any(r.kind == "fiscal_close" for r in epoch_records):
            continue
        row, _ = epoch_metrics(epoch, epoch_records, header, objective)
        objective = row.objective
        rows.append(row)
    return rows
