"""Append-only event log.

Records are ordered by (epoch, step, seq) and carry json-ready data: Decimals
are written as strings, sets as sorted lists, tuples as lists. A record read back
from a written log is equal to the record that was written, so anything computed
from the log in memory can be recomputed from the file.

One record per line:

    {"data": {...}, "epoch": 1, "kind": "transfer", "seq": 17, "step": 2}

:author: Shay Hill
:created: 2025-02-16
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import TYPE_CHECKING, Any

from intralayer_sim.errors import CorruptLog

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path

_FIELDS = ("epoch", "step", "seq", "kind", "data")


def normalize(value: Any) -> Any:
    """Convert a payload to plain json types.

    >>> normalize({"q": Decimal("1.50"), "keys": frozenset({"b", "a"})})
    {'q': '1.50', 'keys': ['a', 'b']}
    """
    if isinstance(value, Decimal):
        return str(value)
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in value.items()}  # pyright: ignore
    if isinstance(value, (set, frozenset)):
        return sorted(normalize(v) for v in value)  # pyright: ignore
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]  # pyright: ignore
    if value is None or isinstance(value, (bool, int, str)):
        return value
    msg = f"cannot log a value of type {type(value).__name__}"
    raise TypeError(msg)


@dataclass(frozen=True)
class EventRecord:
    """One logged event."""

    epoch: int
    step: int
    seq: int
    kind: str
    data: dict[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> tuple[int, int, int]:
        """Sort key of the record."""
        return (self.epoch, self.step, self.seq)

    def to_json(self) -> str:
        """The record as one canonical json line, without the newline."""
        payload = {
            "epoch": self.epoch,
            "step": self.step,
            "seq": self.seq,
            "kind": self.kind,
            "data": self.data,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass
class EventLog:
    """Records of one run, strictly increasing by (epoch, step, seq)."""

    records: list[EventRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def append(self, epoch: int, step: int, kind: str, data: dict[str, Any] | None = None) -> EventRecord:
        """Add a record with the next sequence number.

        :raise ValueError: if (epoch, step) is earlier than the last record's
        """
        seq = self.records[-1].seq + 1 if self.records else 0
        record = EventRecord(epoch, step, seq, kind, normalize(data or {}))
        if self.records and record.key <= self.records[-1].key:
            msg = f"record at {record.key} is not after {self.records[-1].key}"
            raise ValueError(msg)
        self.records.append(record)
        return record

    def by_epoch(self, epoch: int) -> list[EventRecord]:
        """Records of one epoch in log order."""
        return [r for r in self.records if r.epoch == epoch]

    def of_kind(self, kind: str) -> list[EventRecord]:
        """Records of one kind in log order."""
        return [r for r in self.records if r.kind == kind]

    def digest(self) -> str:
        """SHA-256 of the log as written by write_jsonl."""
        sha = hashlib.sha256()
        for record in self.records:
            sha.update(record.to_json().encode("utf-8"))
            sha.update(b"\n")
        return sha.hexdigest()


def write_jsonl(log: EventLog, path: Path) -> None:
    """Write one record per line."""
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for record in log:
            _ = f.write(record.to_json() + "\n")


def _parse(line_no: int, line: str) -> EventRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorruptLog(line_no, f"not json ({e.msg})") from e
    if not isinstance(payload, dict) or set(payload) != set(_FIELDS):  # pyright: ignore
        raise CorruptLog(line_no, f"expected the fields {sorted(_FIELDS)}")
    epoch, step, seq = payload["epoch"], payload["step"], payload["seq"]
    if not all(isinstance(x, int) for x in (epoch, step, seq)):
        raise CorruptLog(line_no, "epoch, step, and seq must be integers")
    if not isinstance(payload["kind"], str) or not isinstance(payload["data"], dict):
        raise CorruptLog(line_no, "kind must be a string and data an object")
    return EventRecord(epoch, step, seq, payload["kind"], payload["data"])


def read_jsonl(path: Path) -> EventLog:
    """Read a log written by write_jsonl.

    :raise CorruptLog: naming the first line that is not utf-8, is not a
        record, is out of order, or is cut off before its newline
    """
    log = EventLog()
    lines = path.read_bytes().split(b"\n")
    for line_no, raw in enumerate(lines, start=1):
        if line_no == len(lines):
            if raw:
                raise CorruptLog(line_no, "truncated record")
            break
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptLog(line_no, f"not utf-8 text: {e.reason}") from e
        record = _parse(line_no, line)
        if log.records and record.key <= log.records[-1].key:
            raise CorruptLog(line_no, f"record {record.key} is out of order")
        log.records.append(record)
    return log
