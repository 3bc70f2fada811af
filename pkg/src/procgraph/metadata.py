"""Evolution, derivation and timeseries queries over artifact versions and reified activities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Union

from .errors import NotAVersion, UnknownEntity, UnknownFilterKey, UnknownNode
from .graph import ErGraph, Node, Triple, as_node, render_term
from .literals import literal_sort_key, parse_instant
from .paths import Path, PathNode, PathNodeSpec, format_path

NEXT_VERSION = "next-version"
FILTER_KEYS = ("what", "how", "when", "who", "where", "which", "why")
EVOLUTION, DERIVATION, TIMESERIES = "evolution", "derivation", "timeseries"


@dataclass(frozen=True)
class InstantRange:
    """Instant interval used by ``when`` filters; either bound may be open."""

    low: str | None = None
    high: str | None = None
    low_inclusive: bool = True
    high_inclusive: bool = True

    @classmethod
    def from_comparison(cls, op: str, value: str) -> "InstantRange":
        if parse_instant(value) is None:
            raise ValueError(f"not an instant: {value!r}")
        if op == "=":
            return cls(value, value)
        if op in (">", ">="):
            return cls(low=value, low_inclusive=op == ">=")
        if op in ("<", "<="):
            return cls(high=value, high_inclusive=op == "<=")
        raise ValueError(f"comparator {op!r} does not apply to instants")

    def intersect(self, other: "InstantRange") -> "InstantRange":
        low, low_inc = self.low, self.low_inclusive
        if other.low is not None and (low is None or _instant(other.low) > _instant(low) or (
            _instant(other.low) == _instant(low) and not other.low_inclusive
        )):
            low, low_inc = other.low, other.low_inclusive
        high, high_inc = self.high, self.high_inclusive
        if other.high is not None and (high is None or _instant(other.high) < _instant(high) or (
            _instant(other.high) == _instant(high) and not other.high_inclusive
        )):
            high, high_inc = other.high, other.high_inclusive
        return InstantRange(low, high, low_inc, high_inc)

    def contains(self, value: str | None) -> bool:
        if value is None:
            return False
        t = parse_instant(value)
        if t is None:
            return False
        if self.low is not None:
            lo = _instant(self.low)
            if t < lo or (t == lo and not self.low_inclusive):
                return False
        if self.high is not None:
            hi = _instant(self.high)
            if t > hi or (t == hi and not self.high_inclusive):
                return False
        return True


def _instant(text: str) -> datetime:
    return parse_instant(text)


FilterValue = Union[str, InstantRange]


@dataclass(frozen=True)
class MetadataRequest:
    mode: str
    target: str
    filters: Mapping[str, FilterValue] = field(default_factory=dict)

    def __post_init__(self):
        for key in self.filters:
            if key not in FILTER_KEYS:
                raise UnknownFilterKey(key)

    def run(self, g: ErGraph) -> "MetadataResult":
        if self.mode == EVOLUTION:
            return evolution_of(g, self.target, self.filters)
        if self.mode == DERIVATION:
            return derivation_of(g, self.target)
        if self.mode == TIMESERIES:
            return timeseries_of(g, self.target, self.filters)
        raise ValueError(f"unknown metadata mode {self.mode!r}")


@dataclass(frozen=True)
class ArtifactVersion:
    id: Node
    artifact: str | None
    created_at: str | None
    author: str | None
    parents: tuple[Node, ...]


@dataclass(frozen=True)
class SeriesEntry:
    node: Node
    stamp: str
    attributes: Mapping[str, str] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class MetadataResult:
    mode: str
    target: Node
    paths: tuple[Path, ...] = ()
    path_ids: Mapping[str, Path] = field(default_factory=dict, compare=False)
    ancestors: tuple[Node, ...] = ()
    series: tuple[SeriesEntry, ...] = ()
    path_node: PathNode | None = field(default=None, compare=False)

    def render(self) -> str:
        if self.mode == EVOLUTION:
            lines = [f"evolutionOf({self.target.id}):"]
            lines += [f"  {pid}: {format_path(p)}" for pid, p in self.path_ids.items()]
            return "\n".join(lines) + "\n"
        if self.mode == DERIVATION:
            return "".join(render_term(n) + "\n" for n in self.ancestors)
        return "".join(f"{e.stamp}\t{render_term(e.node)}\n" for e in self.series)

    def to_json(self) -> str:
        if self.mode == EVOLUTION:
            data = {pid: p.to_json() for pid, p in self.path_ids.items()}
        elif self.mode == DERIVATION:
            data = [n.id for n in self.ancestors]
        else:
            data = [{"id": e.node.id, "stamp": e.stamp} for e in self.series]
        return json.dumps({"mode": self.mode, "target": self.target.id, "result": data})


def _is_version(g: ErGraph, node: Node) -> bool:
    return g.entity_type(node) == "version" or any(p.id == NEXT_VERSION for p, _ in g.out_edges(node)) or any(
        p.id == NEXT_VERSION for p, _ in g.in_edges(node)
    )


def _require_version(g: ErGraph, version: Node | str) -> Node:
    node = as_node(version)
    if node not in g.nodes:
        raise UnknownNode(node)
    if not _is_version(g, node):
        raise NotAVersion(f"{node.id} is not an artifact version")
    return node


def parents(g: ErGraph, node: Node) -> tuple[Node, ...]:
    """Direct predecessors: ``@parent`` attributes plus incoming next-version edges."""
    found = {as_node(v) for v in g.attributes(node).get("parent", ())}
    found.update(s for p, s in g.in_edges(node) if p.id == NEXT_VERSION)
    return tuple(sorted(n for n in found if n in g.nodes))


def get_version(g: ErGraph, version: Node | str) -> ArtifactVersion:
    node = _require_version(g, version)
    return ArtifactVersion(
        node,
        g.attribute(node, "version-of"),
        g.attribute(node, "created-at"),
        g.attribute(node, "author"),
        parents(g, node),
    )


def derivation_of(g: ErGraph, version: Node | str) -> MetadataResult:
    """Transitive ancestors in topological order (oldest first, ties by id)."""
    node = _require_version(g, version)
    closure: dict[Node, tuple[Node, ...]] = {}
    stack = list(parents(g, node))
    while stack:
        n = stack.pop()
        if n in closure:
            continue
        closure[n] = parents(g, n)
        stack.extend(closure[n])
    ordered: list[Node] = []
    placed: set[Node] = set()
    remaining = set(closure)
    while remaining:
        ready = sorted(n for n in remaining if all(p in placed or p not in closure for p in closure[n]))
        if not ready:  # only reachable on graphs admitting cycles
            ready = sorted(remaining)[:1]
        for n in ready:
            ordered.append(n)
            placed.add(n)
            remaining.discard(n)
    return MetadataResult(DERIVATION, node, ancestors=tuple(ordered))


def _is_activity(g: ErGraph, node: Node) -> bool:
    return g.entity_type(node) == "activity"


def activity_paths(g: ErGraph, source: Node, target: Node) -> list[Path]:
    """Paths from ``source`` to ``target`` whose every edge touches an activity node.

    ``next-version`` edges are version links, not activity edges, and are skipped.
    """
    found: list[Path] = []

    def walk(node: Node, trail: list[Triple], visited: set[Node]) -> None:
        for pred, nxt in g.out_edges(node):
            if pred.id == NEXT_VERSION or nxt in visited:
                continue
            if not (_is_activity(g, node) or _is_activity(g, nxt)):
                continue
            trail.append(Triple(node, pred, nxt))
            if nxt == target:
                found.append(Path(tuple(trail)))
            else:
                visited.add(nxt)
                walk(nxt, trail, visited)
                visited.discard(nxt)
            trail.pop()

    walk(source, [], {source})
    return found


def _matches(g: ErGraph, node: Node, key: str, wanted: FilterValue) -> bool:
    values = g.attributes(node).get(key, ())
    if isinstance(wanted, InstantRange):
        return any(wanted.contains(v) for v in values)
    return wanted in values


def path_passes(g: ErGraph, path: Path, filters: Mapping[str, FilterValue]) -> bool:
    """A path passes when every activity node on it satisfies every filter."""
    for node in path.nodes:
        if _is_activity(g, node):
            for key, wanted in filters.items():
                if not _matches(g, node, key, wanted):
                    return False
    return True


def evolution_of(g: ErGraph, version: Node | str, filters: Mapping[str, FilterValue] | None = None) -> MetadataResult:
    """Activity paths from every ancestor version to ``version``.

    Paths are numbered ``path#1..`` in node-sequence order before filtering,
    so a path keeps its id whatever filters are applied.
    """
    filters = dict(filters or {})
    for key in filters:
        if key not in FILTER_KEYS:
            raise UnknownFilterKey(key)
    node = _require_version(g, version)
    ancestors = derivation_of(g, node).ancestors
    every: list[Path] = []
    for a in ancestors:
        every.extend(activity_paths(g, a, node))
    every.sort(key=lambda p: p.sort_key)
    numbered = {f"path#{i}": p for i, p in enumerate(every, start=1)}
    kept = {pid: p for pid, p in numbered.items() if path_passes(g, p, filters)}
    name = f"evolutionOf({node.id})"
    spec = PathNodeSpec(name, "node (edge @type=activity)+ edge node", v_end=node)
    path_node = PathNode(name, spec, tuple(kept.values()), 0, {}, kept)
    return MetadataResult(EVOLUTION, node, tuple(kept.values()), kept, ancestors, (), path_node)


def timeseries_of(g: ErGraph, entity: Node | str, filters: Mapping[str, FilterValue] | None = None) -> MetadataResult:
    """Snapshots of an artifact (its versions by created-at) or an actor's activities by when."""
    filters = dict(filters or {})
    for key in filters:
        if key not in FILTER_KEYS:
            raise UnknownFilterKey(key)
    target = as_node(entity)
    when = filters.pop("when", None)
    if target in g.nodes and _is_version(g, target):
        artifact = g.attribute(target, "version-of")
        versions = [n for n in g.entities("version") if artifact is not None and g.attribute(n, "version-of") == artifact]
        versions = versions or [target]
        stamp_key = "created-at"
    else:
        versions = [n for n in g.entities("version") if g.attribute(n, "version-of") == target.id]
        stamp_key = "created-at"
    if not versions:
        versions = [n for n in g.entities("activity") if target.id in g.attributes(n).get("who", ())]
        stamp_key = "when"
        if not versions and target not in g.nodes:
            raise UnknownEntity(f"no artifact or actor named {target.id!r}")
    entries = []
    for n in versions:
        stamp = g.attribute(n, stamp_key)
        if stamp is None:
            continue
        if isinstance(when, InstantRange) and not when.contains(stamp):
            continue
        if isinstance(when, str) and when != stamp:
            continue
        if not all(_matches(g, n, k, v) for k, v in filters.items()):
            continue
        entries.append(SeriesEntry(n, stamp, {k: vs[0] for k, vs in g.attributes(n).items()}))
    entries.sort(key=lambda e: (literal_sort_key(e.stamp), e.node))
    return MetadataResult(TIMESERIES, target, series=tuple(entries))
