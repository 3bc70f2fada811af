"""Loading triple files and CSV event logs into graph snapshots."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .errors import EmptyInput, IoError, MissingColumn, NotAnEvent
from .graph import (
    PERFORMED,
    ErGraph,
    Node,
    Triple,
    as_node,
    build_graph,
    dump_triples,
    graph_union,
    iter_triple_lines,
    literal,
    parse_triple_line,
    uri,
)
from .literals import format_instant, literal_sort_key, parse_instant

log = logging.getLogger(__name__)

HAPPENED_BEFORE = "happened-before"


@dataclass
class IngestReport:
    rows_read: int = 0
    triples_emitted: int = 0
    rows_rejected: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rows_accepted(self) -> int:
        return self.rows_read - self.rows_rejected

    def reject(self, line: int, reason: str) -> None:
        self.rows_rejected += 1
        self.rejects.append((line, reason))

    def summary(self) -> str:
        text = (
            f"rows_read={self.rows_read} accepted={self.rows_accepted} "
            f"rejected={self.rows_rejected} triples={self.triples_emitted}"
        )
        return "\n".join([text] + [f"  line {n}: {why}" for n, why in self.rejects])


@dataclass(frozen=True)
class EventLogRow:
    event_id: str
    timestamp: str
    actor: str
    activity: str
    extra: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ColumnMapping:
    event_id: str = "event_id"
    timestamp: str = "timestamp"
    actor: str = "actor"
    activity: str = "activity"
    timefmt: str | None = None

    @classmethod
    def from_config(cls, text: str) -> "ColumnMapping":
        """Parse ``key=value`` lines (``col.event_id``, ``col.timestamp``, ``col.actor``, ``col.activity``, ``timefmt``)."""
        values: dict[str, str] = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"mapping line {number}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.startswith("col."):
                name = key[4:]
                if name not in ("event_id", "timestamp", "actor", "activity"):
                    raise ValueError(f"mapping line {number}: unknown column key {key!r}")
                values[name] = value
            elif key == "timefmt":
                values["timefmt"] = value
            else:
                raise ValueError(f"mapping line {number}: unknown key {key!r}")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> "ColumnMapping":
        try:
            return cls.from_config(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(str(exc)) from exc


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def parse_triple_text(text: str, allow_cycles: bool = False) -> tuple[ErGraph, IngestReport]:
    report = IngestReport()
    accepted: list[Triple] = []
    for number, line in iter_triple_lines(text.split("\n")):
        report.rows_read += 1
        try:
            accepted.append(parse_triple_line(line))
        except ValueError as exc:
            report.reject(number, str(exc))
    if not accepted:
        raise EmptyInput("no well-formed triples in input")
    report.triples_emitted = len(accepted)
    return build_graph(accepted, allow_cycles=allow_cycles), report


def load_triple_file(path: str | Path, allow_cycles: bool = False) -> tuple[ErGraph, IngestReport]:
    """Load a tab-separated triple file; malformed lines are reported, not dropped silently."""
    graph, report = parse_triple_text(_read_text(path), allow_cycles=allow_cycles)
    for line, reason in report.rejects:
        log.warning("%s:%d: rejected: %s", path, line, reason)
    return graph, report


def export_triples(g: ErGraph | Iterable[Triple], path: str | Path) -> None:
    triples = g.triples if isinstance(g, ErGraph) else g
    Path(path).write_text(dump_triples(triples), encoding="utf-8")


def normalize_timestamp(raw: str, timefmt: str | None = None) -> str:
    """Canonical ``YYYY-MM-DDTHH:MM:SS.mmmZ`` form; raises ValueError when unparseable."""
    raw = raw.strip()
    if timefmt:
        value = datetime.strptime(raw, timefmt)
    else:
        value = parse_instant(raw)
        if value is None:
            raise ValueError(f"bad timestamp {raw!r}")
    return format_instant(value)


def event_row_triples(row: EventLogRow) -> list[Triple]:
    event = uri(row.event_id)
    out = [
        Triple(uri(row.actor), uri(PERFORMED), event),
        Triple(event, uri("@type"), literal("event")),
        Triple(event, uri("@timestamp"), literal(row.timestamp)),
        Triple(event, uri("@activity"), literal(row.activity)),
    ]
    out.extend(Triple(event, uri("@" + name), literal(value)) for name, value in row.extra.items())
    return out


def read_event_log(text: str, mapping: ColumnMapping = ColumnMapping()) -> tuple[list[EventLogRow], IngestReport]:
    report = IngestReport()
    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    for column in (mapping.event_id, mapping.timestamp, mapping.actor, mapping.activity):
        if column not in header:
            raise MissingColumn(column)
    core = {mapping.event_id, mapping.timestamp, mapping.actor, mapping.activity}
    extras = [c for c in header if c not in core]
    rows: list[EventLogRow] = []
    seen: set[str] = set()
    for record in reader:
        report.rows_read += 1
        # header is line 1; assumes no embedded newlines inside quoted fields
        line = reader.line_num
        if None in record or any(record.get(c) is None for c in header):
            report.reject(line, "wrong number of fields")
            continue
        event_id = record[mapping.event_id].strip()
        actor = record[mapping.actor].strip()
        if not event_id or not actor:
            report.reject(line, "empty event_id or actor")
            continue
        if event_id in seen:
            report.reject(line, f"duplicate event_id {event_id!r}")
            continue
        try:
            stamp = normalize_timestamp(record[mapping.timestamp], mapping.timefmt)
        except ValueError:
            report.reject(line, f"bad timestamp {record[mapping.timestamp]!r}")
            continue
        seen.add(event_id)
        rows.append(
            EventLogRow(event_id, stamp, actor, record[mapping.activity], {c: record[c] for c in extras})
        )
    return rows, report


def load_event_log(
    path: str | Path, config: ColumnMapping | str | Path | None = None
) -> tuple[ErGraph, IngestReport]:
    """Map each CSV row to an event node, its attributes and an ``actor performed event`` edge."""
    if config is None:
        mapping = ColumnMapping()
    elif isinstance(config, ColumnMapping):
        mapping = config
    else:
        mapping = ColumnMapping.from_file(config)
    rows, report = read_event_log(_read_text(path), mapping)
    triples = [t for row in rows for t in event_row_triples(row)]
    report.triples_emitted = len(triples)
    for line, reason in report.rejects:
        log.warning("%s:%d: rejected: %s", path, line, reason)
    return build_graph(triples), report


def emit_time_order_edges(g: ErGraph, scope: Iterable[Node | str] | None = None) -> ErGraph:
    """Add ``happened-before`` edges linking each event to its immediate successor in time.

    ``scope`` is any iterable of node ids (a folder's members, for example);
    the default is every ``@type='event'`` node. Equal timestamps are ordered by
    event id.
    """
    if scope is None:
        events = g.entities("event")
    else:
        events = sorted({as_node(n) for n in scope})
    keyed = []
    for node in events:
        if node not in g.nodes or g.entity_type(node) != "event":
            raise NotAnEvent(node)
        stamp = g.attribute(node, "timestamp")
        if stamp is None:
            raise NotAnEvent(node, "missing @timestamp")
        keyed.append((literal_sort_key(stamp), node))
    keyed.sort()
    edges = [Triple(a, uri(HAPPENED_BEFORE), b) for (_, a), (_, b) in zip(keyed, keyed[1:])]
    return graph_union(g, edges)
