"""Correlation partitioning, folder nodes, process instances, discovery and group-by."""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .errors import (
    DuplicateName,
    EmptyInput,
    IoError,
    NoDefiningQuery,
    NotAnEvent,
    UnknownAggregate,
    UnknownAttribute,
    UnknownRegisteredCondition,
    UnknownAlgorithm,
)
from .graph import ErGraph, EventRecord, Node, Triple, as_node, build_graph, get_event, uri
from .literals import literal_sort_key, parse_number

BOTTOM = "⊥"
DIRECTLY_FOLLOWED_BY = "directly-followed-by"
AGGREGATES = ("count", "sum", "min", "max", "avg")

_SIMPLE_ARG = re.compile(r"^[A-Za-z0-9_\-:/#]+$")


# -- correlation conditions -------------------------------------------------


@dataclass(frozen=True)
class CorrelationCondition:
    """psi(x, y): attribute equality ``x.A = y.B`` or a registered predicate by name."""

    kind: str  # "attr_eq" | "registered"
    attr_x: str = ""
    attr_y: str = ""
    name: str = ""
    args: tuple[str, ...] = ()
    scope: str | None = None

    @classmethod
    def attr_equality(cls, attr_x: str, attr_y: str | None = None, scope: str | None = None) -> "CorrelationCondition":
        return cls("attr_eq", attr_x, attr_y or attr_x, scope=scope)

    @classmethod
    def registered(cls, name: str, args: tuple[str, ...] = (), scope: str | None = None) -> "CorrelationCondition":
        return cls("registered", name=name, args=tuple(args), scope=scope)

    def with_scope(self, scope: str | None) -> "CorrelationCondition":
        return replace(self, scope=scope)

    def to_text(self) -> str:
        if self.kind == "attr_eq":
            return f"x.{self.attr_x} = y.{self.attr_y}"
        if not self.args:
            return self.name
        args = ", ".join(a if _SIMPLE_ARG.match(a) else "'" + a.replace("\\", "\\\\").replace("'", "\\'") + "'" for a in self.args)
        return f"{self.name}({args})"

    def statement_text(self) -> str:
        text = "correlation " + self.to_text()
        if self.scope:
            text += f" within {self.scope}"
        return text


def attr_equal(g: ErGraph, x: Node, y: Node, attr_x: str, attr_y: str | None = None) -> bool:
    """Built-in 'attr-eq' predicate: some value of x.attr_x equals some value of y.attr_y."""
    ys = set(g.attributes(y).get(attr_y or attr_x, ()))
    return any(v in ys for v in g.attributes(x).get(attr_x, ()))


@dataclass(frozen=True)
class PathCondition:
    """phi(start, end, RE): true when a regex-shaped path joins the two bindings."""

    regex: object  # PathRegex or text
    start: Node | str | None = None
    end: Node | str | None = None

    def __post_init__(self):
        from .paths import compile_regex

        object.__setattr__(self, "regex", compile_regex(self.regex))

    def statement_text(self) -> str:
        return "relationship " + self.regex.text


# -- folder nodes -----------------------------------------------------------


@dataclass(frozen=True)
class MembershipEntry:
    id: Node
    added_at: int
    removed_at: int | None = None


@dataclass(frozen=True)
class FolderNode:
    """Named materialized view over a graph snapshot.

    ``key`` holds the correlation values that identify this folder within its
    defining partition, so a timed folder can be re-evaluated on a new snapshot.
    """

    name: str
    members: frozenset[Node]
    definition: CorrelationCondition | PathCondition | None = None
    attributes: dict[str, str] = field(default_factory=dict, compare=False)
    timed: bool = False
    log: tuple[MembershipEntry, ...] = ()
    subgraph: ErGraph | None = field(default=None, compare=False, repr=False)
    snapshot_id: int = 0
    key: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[Node]:
        return sorted(self.members)

    def definition_text(self) -> str:
        return "" if self.definition is None else self.definition.statement_text()

    def render(self) -> str:
        return f"{self.name}\t{len(self.members)}"


def induced_subgraph(g: ErGraph, members: Iterable[Node]) -> ErGraph:
    """Attribute triples of members plus relationship edges between members."""
    members = set(members)
    kept = [
        t
        for t in g.triples
        if t.subject in members and (t.is_attribute or t.object in members)
    ]
    return build_graph(kept, allow_cycles=not g.acyclic)


def _make_folder(
    g: ErGraph,
    name: str,
    members: Iterable[Node],
    definition,
    timed: bool,
    snapshot_id: int,
    key: Iterable[str] = (),
) -> FolderNode:
    members = frozenset(members)
    log = tuple(MembershipEntry(m, snapshot_id) for m in sorted(members)) if timed else ()
    attrs = {
        "definition": definition.statement_text() if definition is not None else "",
        "cardinality": str(len(members)),
        "snapshot": str(snapshot_id),
    }
    return FolderNode(name, members, definition, attrs, timed, log, induced_subgraph(g, members), snapshot_id, frozenset(key))


class _UnionFind:
    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra

    def groups(self) -> list[list]:
        out = defaultdict(list)
        for x in self.parent:
            out[self.find(x)].append(x)
        return [sorted(v) for v in out.values()]


def _scoped(g: ErGraph, scope: str | None) -> list[Node]:
    return g.entities(scope) if scope else g.entities()


def correlation_groups(g: ErGraph, cond: CorrelationCondition, registry=None) -> list[tuple[list[Node], frozenset[str]]]:
    """Connected components of the psi-true pair graph, each with its label values."""
    scoped = _scoped(g, cond.scope)
    if cond.kind == "attr_eq":
        a_side: dict[str, list[Node]] = defaultdict(list)
        b_side: dict[str, list[Node]] = defaultdict(list)
        items = []
        for n in scoped:
            attrs = g.attributes(n)
            xs, ys = attrs.get(cond.attr_x, ()), attrs.get(cond.attr_y, ())
            if xs or ys:
                items.append(n)
            for v in xs:
                a_side[v].append(n)
            for v in ys:
                b_side[v].append(n)
        uf = _UnionFind(items)
        # a value links entities only when it occurs on both sides of psi
        for v in a_side.keys() & b_side.keys():
            group = a_side[v] + b_side[v]
            for other in group[1:]:
                uf.union(group[0], other)
        shared = a_side.keys() & b_side.keys()
        out = []
        for members in uf.groups():
            values = set()
            for m in members:
                attrs = g.attributes(m)
                values.update(v for v in attrs.get(cond.attr_x, ()) if v in shared)
                values.update(v for v in attrs.get(cond.attr_y, ()) if v in shared)
            out.append((members, frozenset(values)))
        return out

    from .registry import CORRELATION_PREDICATE, default_registry

    reg = registry or default_registry()
    try:
        fn = reg.resolve(CORRELATION_PREDICATE, cond.name).fn
    except UnknownAlgorithm:
        raise UnknownRegisteredCondition(f"no correlation predicate named {cond.name!r}") from None
    uf = _UnionFind(scoped)
    for i, x in enumerate(scoped):
        for y in scoped[i + 1 :]:
            if uf.find(x) != uf.find(y) and (fn(g, x, y, *cond.args) or fn(g, y, x, *cond.args)):
                uf.union(x, y)
    return [(members, frozenset()) for members in uf.groups()]


def _label(cond: CorrelationCondition, members: list[Node], values: frozenset[str]) -> str:
    if cond.kind == "attr_eq":
        attr = cond.attr_x if cond.attr_x == cond.attr_y else f"{cond.attr_x}~{cond.attr_y}"
        shown = "|".join(sorted(values, key=literal_sort_key)) if values else members[0].id
        return f"{attr}={shown}"
    return f"{cond.name}={members[0].id}"


def partition_by_correlation(
    g: ErGraph,
    cond: CorrelationCondition,
    into: str | None = None,
    timed: bool = False,
    snapshot_id: int = 0,
    registry=None,
) -> list[FolderNode]:
    """Group scoped entities into folders, one per connected component of psi.

    For ``x.A = x.A`` this is a group-by on A. Folder names are ``A=value``,
    prefixed by ``into.`` when given. Entities without the attribute are left out.
    """
    groups = correlation_groups(g, cond, registry)
    folders = []
    for members, values in groups:
        label = _label(cond, members, values)
        name = f"{into}.{label}" if into else label
        folders.append(_make_folder(g, name, members, cond, timed, snapshot_id, values or {members[0].id}))
    folders.sort(key=lambda f: f.name)
    return folders


def apply_path_condition(
    g: ErGraph,
    pc: PathCondition,
    into: str,
    catalog=None,
    timed: bool = False,
    snapshot_id: int = 0,
    max_hops: int | None = None,
) -> FolderNode:
    """Folder of every node ``e`` such that a regex path runs from the start binding to ``e``."""
    if catalog is not None and (into in catalog.folders or into in catalog.path_nodes):
        raise DuplicateName(f"folder {into!r} already exists")
    members = _path_condition_members(g, pc, max_hops)
    folder = _make_folder(g, into, members, pc, timed, snapshot_id)
    if catalog is not None:
        catalog.put_folder(folder)
    return folder


def _path_condition_members(g: ErGraph, pc: PathCondition, max_hops: int | None) -> set[Node]:
    from .paths import compile_regex, find_paths, reachable_ends

    regex = compile_regex(pc.regex)
    if pc.start is not None:
        start = as_node(pc.start)
        ends = set(reachable_ends(g, regex, start, max_hops=max_hops)) if start in g.nodes else set()
    else:
        hops = max_hops if not g.acyclic else None
        ends = {p.end for p in find_paths(g, regex, max_hops=hops)}
    if pc.end is not None:
        ends &= {as_node(pc.end)}
    return ends


def refresh_timed_folder(
    folder: FolderNode,
    g: ErGraph,
    snapshot_id: int,
    registry=None,
    max_hops: int | None = None,
) -> FolderNode:
    """Re-run the defining query on a new snapshot and stamp joiners and leavers."""
    if folder.definition is None:
        raise NoDefiningQuery(f"folder {folder.name!r} has no defining query")
    if isinstance(folder.definition, PathCondition):
        members = frozenset(_path_condition_members(g, folder.definition, max_hops))
        key = folder.key
    else:
        members, key = set(), set()
        for group, values in correlation_groups(g, folder.definition, registry):
            labels = values or {group[0].id}
            if labels & folder.key or folder.members.intersection(group):
                members.update(group)
                key.update(labels)
        members, key = frozenset(members), frozenset(key or folder.key)
    if members == folder.members:
        return replace(folder, snapshot_id=snapshot_id, subgraph=induced_subgraph(g, members))
    log = list(folder.log)
    if folder.timed:
        active = {e.id for e in log if e.removed_at is None}
        for i, entry in enumerate(log):
            if entry.removed_at is None and entry.id not in members:
                log[i] = replace(entry, removed_at=snapshot_id)
        log.extend(MembershipEntry(m, snapshot_id) for m in sorted(members - active))
    attrs = dict(folder.attributes, cardinality=str(len(members)), snapshot=str(snapshot_id))
    return replace(
        folder,
        members=members,
        attributes=attrs,
        log=tuple(log),
        subgraph=induced_subgraph(g, members),
        snapshot_id=snapshot_id,
        key=key,
    )


# -- process instances and discovery ----------------------------------------


@dataclass(frozen=True)
class ProcessInstance:
    """Chronologically ordered events of one process execution."""

    events: tuple[EventRecord, ...]
    key: str = ""

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.data.get("activity", "") for e in self.events)

    @property
    def edges(self) -> tuple[Triple, ...]:
        return tuple(
            Triple(a.id, uri(DIRECTLY_FOLLOWED_BY), b.id) for a, b in zip(self.events, self.events[1:])
        )

    def __len__(self) -> int:
        return len(self.events)


def build_process_instances(folders: Iterable[FolderNode], graph: ErGraph | None = None) -> list[ProcessInstance]:
    """One instance per folder: member events sorted by (timestamp, event id)."""
    out = []
    for folder in folders:
        g = graph if graph is not None else folder.subgraph
        records = []
        for m in folder.members:
            if g is None or m not in g.nodes or g.entity_type(m) != "event":
                raise NotAnEvent(m)
            stamp = g.attribute(m, "timestamp")
            if stamp is None:
                raise NotAnEvent(m, "missing @timestamp")
            records.append((literal_sort_key(stamp), m.id, get_event(g, m)))
        records.sort(key=lambda r: (r[0], r[1]))
        out.append(ProcessInstance(tuple(r[2] for r in records), folder.name))
    return out


def instances_graph(instances: Iterable[ProcessInstance], g: ErGraph) -> ErGraph:
    """Process instances graph: member events plus directly-followed-by edges."""
    instances = list(instances)
    members = {as_node(e.id) for inst in instances for e in inst.events}
    edges = [t for inst in instances for t in inst.edges]
    return build_graph(set(induced_subgraph(g, members).triples) | set(edges))


@dataclass(frozen=True)
class ProcessModel:
    activities: tuple[str, ...]
    edges: dict[tuple[str, str], int]
    starts: dict[str, int]
    ends: dict[str, int]
    algorithm: str = "dfg"

    def to_dot(self) -> str:
        lines = ["digraph process {"]
        lines += [f'  "{a}" -> "{b}" [label={n}];' for (a, b), n in sorted(self.edges.items())]
        lines.append("}")
        return "\n".join(lines)

    def edge_list(self) -> str:
        """Plain ``a -> b [label=freq]`` lines."""
        return "".join(f"{a} -> {b} [label={n}]\n" for (a, b), n in sorted(self.edges.items()))


def directly_follows(instances: Sequence[ProcessInstance]) -> ProcessModel:
    """Directly-follows graph: edge a->b counts consecutive (a, b) pairs across instances."""
    edges: Counter = Counter()
    starts: Counter = Counter()
    ends: Counter = Counter()
    acts: set[str] = set()
    for inst in instances:
        seq = inst.activities if isinstance(inst, ProcessInstance) else tuple(inst)
        if not seq:
            continue
        acts.update(seq)
        starts[seq[0]] += 1
        ends[seq[-1]] += 1
        edges.update(zip(seq, seq[1:]))
    return ProcessModel(tuple(sorted(acts)), dict(sorted(edges.items())), dict(sorted(starts.items())), dict(sorted(ends.items())))


def discover_model(instances: Sequence[ProcessInstance], algo: str = "dfg", registry=None) -> ProcessModel:
    from .registry import PROCESS_DISCOVERY, default_registry

    instances = list(instances)
    if not instances:
        raise EmptyInput("process discovery needs at least one instance")
    fn = (registry or default_registry()).resolve(PROCESS_DISCOVERY, algo).fn
    return fn(instances)


# -- group-by summarization -------------------------------------------------


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)] + ["\t".join(r) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps([dict(zip(self.columns, r)) for r in self.rows], ensure_ascii=False)


def _fmt(d: Decimal) -> str:
    if d == d.to_integral_value():
        return str(d.quantize(Decimal(1)))
    return format(d.normalize(), "f")


def _aggregate(agg: str, values: list[str], count: int) -> str:
    if agg == "count":
        return str(count)
    if agg in ("min", "max"):
        if not values:
            return ""
        pick = min if agg == "min" else max
        return pick(values, key=literal_sort_key)
    nums = [n for n in (parse_number(v) for v in values) if n is not None]
    if not nums:
        return ""
    total = sum(nums, Decimal(0))
    if agg == "sum":
        return _fmt(total)
    return _fmt(round(total / len(nums), 6))


def group_summarize(
    source: ErGraph | FolderNode,
    dimensions: Sequence[str],
    measures: Sequence[tuple[str, str]] = (("*", "count"),),
    entity_type: str | None = None,
) -> Table:
    """One row per distinct combination of dimension values; missing values go to the bottom bucket.

    ``measures`` are (attribute, aggregate) pairs; ``("*", "count")`` counts members.
    """
    for _, agg in measures:
        if agg not in AGGREGATES:
            raise UnknownAggregate(f"unknown aggregate {agg!r}")
    if isinstance(source, FolderNode):
        g = source.subgraph if source.subgraph is not None else build_graph(())
        members = [m for m in source.sorted_members() if entity_type is None or g.entity_type(m) == entity_type]
    else:
        g = source
        members = g.entities(entity_type) if entity_type else [n for n in g.entities() if g.attributes(n)]
    if members and dimensions:
        for dim in dimensions:
            if not any(g.attribute(m, dim) is not None for m in members):
                raise UnknownAttribute(f"no member carries attribute {dim!r}")
    groups: dict[tuple[str, ...], list[Node]] = defaultdict(list)
    for m in members:
        key = tuple(g.attribute(m, d) if g.attribute(m, d) is not None else BOTTOM for d in dimensions)
        groups[key].append(m)
    rows = []
    for key in sorted(groups):
        ms = groups[key]
        row = list(key)
        for attr, agg in measures:
            if attr == "*":
                values, count = [], len(ms)
            else:
                values = [v for m in ms for v in g.attributes(m).get(attr, ())]
                count = sum(1 for m in ms if attr in g.attributes(m))
            row.append(_aggregate(agg, values, count))
        rows.append(tuple(row))
    columns = tuple(dimensions) + tuple(f"{agg}({attr})" for attr, agg in measures)
    return Table(columns, tuple(rows))


# -- persistence ------------------------------------------------------------


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.\-=]", "_", name)


def save_folder(folder: FolderNode, directory: str | FsPath) -> FsPath:
    """Write ``<name>.json`` (manifest) and ``<name>.members`` into ``directory``."""
    root = FsPath(directory)
    manifest = {
        "name": folder.name,
        "definition": folder.definition_text(),
        "timed": folder.timed,
        "snapshot_id": folder.snapshot_id,
        "key": sorted(folder.key),
        "attributes": folder.attributes,
    }
    if isinstance(folder.definition, PathCondition):
        manifest["start"] = None if folder.definition.start is None else as_node(folder.definition.start).id
        manifest["end"] = None if folder.definition.end is None else as_node(folder.definition.end).id
    if folder.timed:
        lines = [
            f"{e.id.id}\t{e.added_at}\t{'' if e.removed_at is None else e.removed_at}" for e in folder.log
        ]
    else:
        lines = [m.id for m in folder.sorted_members()]
    try:
        root.mkdir(parents=True, exist_ok=True)
        path = root / (_safe(folder.name) + ".json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (root / (_safe(folder.name) + ".members")).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write folder {folder.name!r}: {exc}") from exc
    return path


def _definition_from_text(text: str, manifest: dict):
    if not text:
        return None
    from .lang.parser import parse
    from .lang.ast import CorrelationStmt, RelationshipStmt

    stmt = parse(text)
    if isinstance(stmt, CorrelationStmt):
        return stmt.condition
    if isinstance(stmt, RelationshipStmt):
        return PathCondition(stmt.regex, manifest.get("start"), manifest.get("end"))
    raise ValueError(f"unsupported folder definition {text!r}")


def load_folder(manifest_path: str | FsPath, graph: ErGraph | None = None) -> FolderNode:
    path = FsPath(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        member_lines = path.with_suffix(".members").read_text(encoding="utf-8").splitlines()
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read folder {path}: {exc}") from exc
    log = []
    if manifest["timed"]:
        for line in member_lines:
            ident, added, removed = line.split("\t")
            log.append(MembershipEntry(as_node(ident), int(added), int(removed) if removed else None))
        members = frozenset(e.id for e in log if e.removed_at is None)
    else:
        members = frozenset(as_node(line) for line in member_lines if line)
    return FolderNode(
        manifest["name"],
        members,
        _definition_from_text(manifest["definition"], manifest),
        dict(manifest.get("attributes", {})),
        manifest["timed"],
        tuple(log),
        induced_subgraph(graph, members) if graph is not None else None,
        manifest["snapshot_id"],
        frozenset(manifest.get("key", ())),
    )
