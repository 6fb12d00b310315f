"""Write run artifacts and rebuild them from an event log.

A run writes three files into its output directory:

    metrics.csv     one row per epoch, columns in metrics.CSV_COLUMNS
    events.jsonl    the event log, one record per line
    summary.txt     the text summary, filled from resources/summary.txt

Everything in the CSV and the summary is computed from log records, so a
written log reproduces both.

:author: Shay Hill
:created: 2025-02-19
"""

from __future__ import annotations

import csv
import io
from decimal import Decimal
from string import Template
from typing import TYPE_CHECKING, Any

from intralayer_sim.comms import data_connectivity_cost
from intralayer_sim.core import ZERO, quantize_metric
from intralayer_sim.errors import NoVolume
from intralayer_sim.event_log import EventLog, read_jsonl, write_jsonl
from intralayer_sim.fiscal import FiscalPoint, fiscal_objective
from intralayer_sim.globs import SUMMARY_TEMPLATE
from intralayer_sim.liquidity import aggregate_ce_vc
from intralayer_sim.metrics import CSV_COLUMNS, replay
from intralayer_sim.topology import (
    EcosystemGraph,
    NetworkValueModel,
    gateway_diameter,
    network_value,
    setup_cost_gateway,
    total_setup_cost_bilateral,
)

if TYPE_CHECKING:
    from collections.abc import Collection, Sequence
    from pathlib import Path

    from intralayer_sim.engine import RunResult
    from intralayer_sim.event_log import EventRecord
    from intralayer_sim.metrics import EpochMetrics

METRICS_FILE = "metrics.csv"
EVENTS_FILE = "events.jsonl"
SUMMARY_FILE = "summary.txt"

with SUMMARY_TEMPLATE.open(encoding="utf-8") as _f:
    _SUMMARY_TEMPLATE = Template(_f.read())


def format_metrics_csv(rows: Sequence[EpochMetrics]) -> str:
    """A header line and one line per epoch."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(row.as_row() for row in rows)
    return buffer.getvalue()


def write_metrics_csv(rows: Sequence[EpochMetrics], path: Path) -> None:
    """Write a header and one row per epoch."""
    _ = path.write_text(format_metrics_csv(rows), encoding="utf-8", newline="")


def _fmt(value: Decimal | None) -> str:
    return "n/a" if value is None else format(quantize_metric(value), "f")


def _sum(records: Sequence[EventRecord], kind: str, key: str) -> Decimal:
    return sum((Decimal(r.data[key]) for r in records if r.kind == kind and key in r.data), ZERO)


def _bootstrap(
    records: Sequence[EventRecord], header: dict[str, Any], rows: Sequence[EpochMetrics]
) -> dict[str, str]:
    """CE and infrastructure costs of the bootstrapping phase."""
    phase_end = int(header["phase_end"])
    early = [r for r in records if 1 <= r.epoch <= phase_end]
    conversions = [r.data for r in early if r.kind == "conversion" and r.data["ce"] is not None]
    try:
        ce_vc: Decimal | None = aggregate_ce_vc(
            [(Decimal(d["value"]), Decimal(d["ce"])) for d in conversions]
        )
    except NoVolume:
        ce_vc = None

    dc_fees: dict[int, Decimal] = {}
    pl = ZERO
    for r in early:
        if r.kind != "fee":
            continue
        if r.data["service"] == "DC":
            dc_fees[r.epoch] = dc_fees.get(r.epoch, ZERO) + Decimal(r.data["gross"])
        elif r.data["service"] == "PL":
            pl += Decimal(r.data["gross"])
    alpha_psi, alpha_d = Decimal(header["alpha_psi"]), Decimal(header["alpha_d"])
    dc = sum(
        (
            data_connectivity_cost(
                row.psi, row.lag or ZERO, dc_fees.get(row.epoch, ZERO), alpha_psi, alpha_d
            )
            for row in rows
            if row.epoch <= phase_end
        ),
        ZERO,
    )
    issued = ZERO
    for r in early:
        if r.kind == "fiscal_close":
            issued += sum((Decimal(q) for q in r.data["credits_issued"].values()), ZERO)
    return {
        "phase_end": str(phase_end),
        "bootstrap_conversions": str(len(conversions)),
        "bootstrap_ce_vc": _fmt(ce_vc),
        "bootstrap_dc": _fmt(dc),
        "bootstrap_pl": _fmt(pl),
        "credits_issued": _fmt(issued),
    }


def _topology(records: Sequence[EventRecord], header: dict[str, Any]) -> dict[str, str]:
    """Setup costs and network value of the final agent set."""
    capital = [r for r in records if r.kind == "agent_capital"]
    last = max((r.epoch for r in capital), default=0)
    final = sorted({r.data["agent"] for r in capital if r.epoch == last})
    graph = EcosystemGraph(final)
    network = header["network"]
    link_cost = Decimal(network["link_cost"])
    model = NetworkValueModel(network["kind"], Decimal(network["scale"]))
    return {
        "n_agents": str(graph.n_agents),
        "bilateral": _fmt(total_setup_cost_bilateral(graph, link_cost)),
        "gateway": _fmt(setup_cost_gateway(graph, link_cost)),
        "diameter": str(gateway_diameter(graph)),
        "network_kind": network["kind"],
        "network_value": _fmt(network_value(model, graph.n_agents)),
    }


def render_summary(records: Sequence[EventRecord]) -> str:
    """Fill the summary template from a run's records.

    :raise ValueError: if the records have no "scenario" header
    """
    header = next((r.data for r in records if r.kind == "scenario"), None)
    if header is None:
        msg = "the log has no scenario record"
        raise ValueError(msg)
    rows = replay(records)
    closes = [r.data for r in records if r.kind == "fiscal_close"]
    points = [
        FiscalPoint(Decimal(c["NF"]) - Decimal(c["B"]), Decimal(c["gamma"]), Decimal(c["R"]))
        for c in closes
    ]
    alpha = Decimal(header["alpha"])
    budgets = [c["budget"] for c in closes]
    losses = _sum(records, "lease_mark", "loss") + _sum(records, "lease_close", "loss")
    digest = EventLog(list(records)).digest()
    values = {
        "seed": str(header["seed"]),
        "epochs": str(len(rows)),
        "records": str(len(records)),
        "log_hash": digest,
        "equity": _fmt(Decimal(closes[-1]["R"])) if closes else "n/a",
        "gamma": _fmt(Decimal(closes[-1]["gamma"])) if closes else "n/a",
        "breaches": str(sum(1 for c in closes if c["breach"])),
        "alpha": _fmt(alpha),
        "fiscal_objective": _fmt(fiscal_objective(points, alpha)),
        "objective": _fmt(rows[-1].objective) if rows else "n/a",
        "nol_vc": _fmt(sum((Decimal(b["VC_K"]) for b in budgets), ZERO)),
        "nol_ke": _fmt(sum((Decimal(b["KE_K"]) for b in budgets), ZERO)),
        "lease_losses": _fmt(losses),
    }
    values.update(_bootstrap(records, header, rows))
    values.update(_topology(records, header))
    return _SUMMARY_TEMPLATE.substitute(values)


def write_artifacts(
    result: RunResult, out: Path, formats: Collection[str] = ("csv", "jsonl")
) -> list[Path]:
    """Write a run's artifacts into out, creating it if needed.

    :param result: the finished run
    :param out: output directory
    :param formats: "csv" for metrics.csv, "jsonl" for events.jsonl. The
        summary is always written.
    :return: paths written
    """
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "csv" in formats:
        write_metrics_csv(result.metrics, out / METRICS_FILE)
        written.append(out / METRICS_FILE)
    if "jsonl" in formats:
        write_jsonl(result.log, out / EVENTS_FILE)
        written.append(out / EVENTS_FILE)
    _ = (out / SUMMARY_FILE).write_text(render_summary(result.log.records), encoding="utf-8")
    written.append(out / SUMMARY_FILE)
    return written


def replay_log(path: Path) -> tuple[EventLog, list[EpochMetrics]]:
    """Read a written log and recompute its metrics.

    :raise CorruptLog: if the log cannot be read
    """
    log = read_jsonl(path)
    return log, replay(log.records)
