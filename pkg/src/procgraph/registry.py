"""Pluggable algorithm registry and the time-aware snapshot catalog."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .errors import DuplicateName, IoError, SnapshotInUse, UnknownAlgorithm, UnknownSnapshot
from .graph import ErGraph, Triple, build_graph, dump_triples, format_triple, parse_triple_line
from .literals import format_instant

PROCESS_DISCOVERY = "process_discovery"
CORRELATION_PREDICATE = "correlation_predicate"
SUMMARIZER = "summarizer"
KINDS = (PROCESS_DISCOVERY, CORRELATION_PREDICATE, SUMMARIZER)

COMPACTION_THRESHOLD = 64


@dataclass(frozen=True)
class AlgorithmEntry:
    """A named external algorithm.

    Call contracts per kind:
      process_discovery:     fn(instances) -> ProcessModel
      correlation_predicate: fn(graph, x, y, *args) -> bool
      summarizer:            fn(source, dimensions, measures, **kw) -> Table
    """

    name: str
    kind: str
    fn: Callable
    description: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        if not self.name:
            raise ValueError("algorithm name must be non-empty")


class AlgorithmRegistry:
    def __init__(self):
        self._entries: dict[tuple[str, str], AlgorithmEntry] = {}
        self._lock = threading.Lock()

    def register(self, entry: AlgorithmEntry | str, kind: str | None = None, fn: Callable | None = None) -> AlgorithmEntry:
        if not isinstance(entry, AlgorithmEntry):
            entry = AlgorithmEntry(entry, kind, fn)
        with self._lock:
            key = (entry.kind, entry.name)
            if key in self._entries:
                raise DuplicateName(f"{entry.kind} {entry.name!r} is already registered")
            # copy-on-write keeps lookups lock-free
            entries = dict(self._entries)
            entries[key] = entry
            self._entries = entries
        return entry

    def resolve(self, kind: str, name: str) -> AlgorithmEntry:
        try:
            return self._entries[(kind, name)]
        except KeyError:
            raise UnknownAlgorithm(f"no {kind} named {name!r}") from None

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._entries

    def names(self, kind: str) -> list[str]:
        return sorted(n for k, n in self._entries if k == kind)


_default: AlgorithmRegistry | None = None
_default_lock = threading.Lock()


def default_registry() -> AlgorithmRegistry:
    """Process-wide registry with the built-in 'dfg', 'attr-eq' and 'group-by' entries."""
    global _default
    if _default is None:
        with _default_lock:
            if _default is None:
                from . import summarize

                reg = AlgorithmRegistry()
                reg.register("dfg", PROCESS_DISCOVERY, summarize.directly_follows)
                reg.register("attr-eq", CORRELATION_PREDICATE, summarize.attr_equal)
                reg.register("group-by", SUMMARIZER, summarize.group_summarize)
                _default = reg
    return _default


# -- folder / path-node catalog ---------------------------------------------


class Catalog:
    """Named folders and path nodes. Writers are serialized; readers see whole objects."""

    def __init__(self):
        self.folders: dict[str, object] = {}
        self.path_nodes: dict[str, object] = {}
        self._lock = threading.RLock()

    def _put(self, table: dict, item, replace: bool, what: str) -> None:
        with self._lock:
            if not replace and (item.name in self.folders or item.name in self.path_nodes):
                raise DuplicateName(f"{what} {item.name!r} already exists")
            other = self.path_nodes if table is self.folders else self.folders
            if item.name in other:
                raise DuplicateName(f"name {item.name!r} is used by another catalog object")
            table[item.name] = item

    def put_folder(self, folder, replace: bool = False) -> None:
        self._put(self.folders, folder, replace, "folder")

    def put_path_node(self, node, replace: bool = False) -> None:
        self._put(self.path_nodes, node, replace, "path node")

    def drop(self, name: str) -> None:
        with self._lock:
            self.folders.pop(name, None)
            self.path_nodes.pop(name, None)

    def referenced_snapshots(self) -> set[int]:
        items = list(self.folders.values()) + list(self.path_nodes.values())
        return {item.snapshot_id for item in items}


# -- snapshots --------------------------------------------------------------


@dataclass(frozen=True)
class SnapshotInfo:
    id: int
    created_at: str
    parent: int | None
    added: int
    removed: int

    def render(self) -> str:
        parent = "-" if self.parent is None else str(self.parent)
        return f"{self.id}\t{self.created_at}\tparent={parent}\t+{self.added}\t-{self.removed}"


@dataclass
class _Stored:
    full: frozenset[Triple] | None = None
    added: frozenset[Triple] = frozenset()
    removed: frozenset[Triple] = frozenset()
    depth: int = 0  # deltas since the last full copy


def _utc_now() -> str:
    return format_instant(datetime.now(timezone.utc))


class SnapshotCatalog:
    """Immutable graph versions kept as base + delta chains.

    Snapshot ids start at 1 and increase strictly. Every ``COMPACTION_THRESHOLD``
    deltas a full copy is stored so that materializing any version touches a
    bounded chain.
    """

    def __init__(self, base: ErGraph | Iterable[Triple] = (), allow_cycles: bool = False, clock: Callable[[], str] = _utc_now):
        self.allow_cycles = allow_cycles
        self.catalog = Catalog()
        self._clock = clock
        self._info: dict[int, SnapshotInfo] = {}
        self._store: dict[int, _Stored] = {}
        self._cache: dict[int, ErGraph] = {}
        self._pins: dict[int, int] = {}
        self._lock = threading.RLock()
        graph = base if isinstance(base, ErGraph) else build_graph(base, allow_cycles=allow_cycles)
        self._info[1] = SnapshotInfo(1, clock(), None, len(graph.triples), 0)
        self._store[1] = _Stored(full=graph.triples)
        self._cache[1] = graph

    @property
    def latest(self) -> int:
        return max(self._info)

    def list(self) -> list[SnapshotInfo]:
        return [self._info[i] for i in sorted(self._info)]

    def __contains__(self, snapshot_id: int) -> bool:
        return snapshot_id in self._info

    def _triples(self, snapshot_id: int) -> frozenset[Triple]:
        chain = []
        sid = snapshot_id
        while self._store[sid].full is None:
            chain.append(self._store[sid])
            sid = self._info[sid].parent
        triples = set(self._store[sid].full)
        for stored in reversed(chain):
            triples -= stored.removed
            triples |= stored.added
        return frozenset(triples)

    def graph(self, snapshot_id: int | None = None) -> ErGraph:
        sid = self.latest if snapshot_id is None else snapshot_id
        with self._lock:
            if sid not in self._info:
                raise UnknownSnapshot(f"no snapshot {sid}")
            g = self._cache.get(sid)
            if g is None:
                g = build_graph(self._triples(sid), allow_cycles=self.allow_cycles)
                self._cache[sid] = g
                if len(self._cache) > 8:
                    for old in sorted(self._cache)[:-8]:
                        if old != sid:
                            del self._cache[old]
            return g

    def commit_snapshot(self, additions: Iterable[Triple] = (), removals: Iterable[Triple] = ()) -> int:
        """Apply a delta to the latest snapshot; returns the new id (previous + 1)."""
        with self._lock:
            parent = self.latest
            before = self.graph(parent)
            removed = frozenset(removals) & before.triples
            added = frozenset(additions) - (before.triples - removed)
            triples = (before.triples - removed) | added
            g = build_graph(triples, allow_cycles=self.allow_cycles)
            sid = parent + 1
            depth = self._store[parent].depth + 1
            if depth >= COMPACTION_THRESHOLD:
                stored = _Stored(full=g.triples)
            else:
                stored = _Stored(added=added, removed=removed, depth=depth)
            self._store[sid] = stored
            self._info[sid] = SnapshotInfo(sid, self._clock(), parent, len(added), len(removed))
            self._cache[sid] = g
            return sid

    @contextmanager
    def pin(self, snapshot_id: int | None = None):
        """Hold a snapshot for the duration of a query; dropping it is refused meanwhile."""
        sid = self.latest if snapshot_id is None else snapshot_id
        with self._lock:
            if sid not in self._info:
                raise UnknownSnapshot(f"no snapshot {sid}")
            self._pins[sid] = self._pins.get(sid, 0) + 1
        try:
            yield self.graph(sid)
        finally:
            with self._lock:
                self._pins[sid] -= 1
                if not self._pins[sid]:
                    del self._pins[sid]

    def drop(self, snapshot_id: int) -> None:
        """Garbage-collect one snapshot; refused while a folder, path node or reader references it."""
        with self._lock:
            if snapshot_id not in self._info:
                raise UnknownSnapshot(f"no snapshot {snapshot_id}")
            if snapshot_id in self.catalog.referenced_snapshots() or snapshot_id in self._pins:
                raise SnapshotInUse(f"snapshot {snapshot_id} is referenced")
            if snapshot_id == self.latest:
                raise SnapshotInUse("the latest snapshot cannot be dropped")
            for sid, info in list(self._info.items()):
                if info.parent == snapshot_id:
                    if self._store[sid].full is None:
                        self._store[sid] = _Stored(full=self._triples(sid))
                    self._info[sid] = SnapshotInfo(sid, info.created_at, None, info.added, info.removed)
            del self._info[snapshot_id]
            del self._store[snapshot_id]
            self._cache.pop(snapshot_id, None)

    # -- persistence --------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        root = Path(directory)
        try:
            (root / "snapshots").mkdir(parents=True, exist_ok=True)
            manifest = []
            for sid in sorted(self._info):
                info, stored = self._info[sid], self._store[sid]
                entry = {
                    "id": sid,
                    "created_at": info.created_at,
                    "parent": info.parent,
                    "added": info.added,
                    "removed": info.removed,
                    "depth": stored.depth,
                    "full": stored.full is not None,
                }
                manifest.append(entry)
                path = root / "snapshots" / f"{sid}.tsv"
                if stored.full is not None:
                    path.write_text(dump_triples(stored.full), encoding="utf-8")
                else:
                    lines = ["+\t" + format_triple(t) for t in sorted(stored.added)]
                    lines += ["-\t" + format_triple(t) for t in sorted(stored.removed)]
                    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
            data = {"allow_cycles": self.allow_cycles, "snapshots": manifest}
            (root / "catalog.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write catalog {root}: {exc}") from exc

    @classmethod
    def load(cls, directory: str | Path) -> "SnapshotCatalog":
        root = Path(directory)
        try:
            data = json.loads((root / "catalog.json").read_text(encoding="utf-8"))
            self = cls.__new__(cls)
            self.allow_cycles = data["allow_cycles"]
            self.catalog = Catalog()
            self._clock = _utc_now
            self._info, self._store, self._cache, self._pins = {}, {}, {}, {}
            self._lock = threading.RLock()
            for entry in data["snapshots"]:
                sid = entry["id"]
                text = (root / "snapshots" / f"{sid}.tsv").read_text(encoding="utf-8")
                if entry["full"]:
                    triples = frozenset(parse_triple_line(line) for line in text.splitlines() if line)
                    stored = _Stored(full=triples, depth=entry["depth"])
                else:
                    added, removed = set(), set()
                    for line in text.splitlines():
                        if line:
                            sign, rest = line.split("\t", 1)
                            (added if sign == "+" else removed).add(parse_triple_line(rest))
                    stored = _Stored(added=frozenset(added), removed=frozenset(removed), depth=entry["depth"])
                self._store[sid] = stored
                self._info[sid] = SnapshotInfo(sid, entry["created_at"], entry["parent"], entry["added"], entry["removed"])
        except (OSError, KeyError, ValueError) as exc:
            raise IoError(f"cannot read catalog {root}: {exc}") from exc
        return self

