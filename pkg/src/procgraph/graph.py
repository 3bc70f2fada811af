"""Entity-relationship graph built from RDF-style triples.

Relationship edges connect entities; attribute edges use an ``@``-prefixed
predicate and end in a literal. An :class:`ErGraph` is an immutable snapshot:
every operation that changes the triple set builds a new one.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from .errors import CyclicRelationshipError, MalformedTriple, NotAnEvent, UnknownNode

URI = "uri"
BLANK = "blank"
LITERAL = "literal"
NODE_KINDS = (URI, BLANK, LITERAL)

PERFORMED = "performed"


@dataclass(frozen=True, order=True, slots=True)
class Node:
    id: str
    kind: str = URI

    def __str__(self) -> str:
        return render_term(self)


def uri(id: str) -> Node:
    return Node(id, URI)


def blank(id: str) -> Node:
    return Node(id, BLANK)


def literal(text: str) -> Node:
    return Node(str(text), LITERAL)


def as_node(value: Node | str) -> Node:
    """Strings name URI nodes; ``_:x`` names a blank node."""
    if isinstance(value, Node):
        return value
    if value.startswith("_:"):
        return blank(value[2:])
    return uri(value)


@dataclass(frozen=True, order=True, slots=True)
class Triple:
    subject: Node
    predicate: Node
    object: Node

    @property
    def is_attribute(self) -> bool:
        return self.predicate.id.startswith("@")

    def __str__(self) -> str:
        return format_triple(self)


def triple(s: Node | str, p: Node | str, o: Node | str) -> Triple:
    """Shorthand constructor; the object of an ``@`` predicate defaults to a literal."""
    s_node = as_node(s)
    p_node = as_node(p)
    if isinstance(o, Node):
        o_node = o
    elif p_node.id.startswith("@"):
        o_node = literal(o)
    else:
        o_node = as_node(o)
    return Triple(s_node, p_node, o_node)


def check_triple(t: Triple) -> str | None:
    """Return the reason ``t`` violates the triple invariants, or None."""
    if not isinstance(t, Triple):
        return f"not a triple: {t!r}"
    for part in (t.subject, t.predicate, t.object):
        if not isinstance(part, Node) or part.kind not in NODE_KINDS:
            return f"bad term {part!r}"
        if part.kind != LITERAL and not part.id:
            return "empty node id"
    if t.subject.kind == LITERAL:
        return "literal in subject position"
    if t.predicate.kind != URI:
        return "predicate must be a URI"
    if t.predicate.id == "@":
        return "empty attribute name"
    if t.is_attribute and t.object.kind != LITERAL:
        return "attribute value must be a literal"
    return None


@dataclass(frozen=True)
class EntityRecord:
    id: Node
    entity_type: str | None
    attributes: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EventRecord:
    id: Node
    actor: Node | None
    timestamp: str
    data: Mapping[str, str] = field(default_factory=dict)


class ErGraph:
    """Immutable triple snapshot with vertical partitions and adjacency indexes.

    Build instances with :func:`build_graph`; the constructor trusts its input.
    """

    def __init__(self, triples: frozenset[Triple], acyclic: bool = True):
        self.triples = triples
        self.acyclic = acyclic
        partitions: dict[str, list[Triple]] = defaultdict(list)
        out: dict[Node, list[tuple[Node, Node]]] = defaultdict(list)
        inc: dict[Node, list[tuple[Node, Node]]] = defaultdict(list)
        attrs: dict[Node, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
        nodes: set[Node] = set()
        for t in triples:
            partitions[t.predicate.id].append(t)
            if t.is_attribute:
                attrs[t.subject][t.predicate.id[1:]].append(t.object.id)
                nodes.add(t.subject)
            else:
                out[t.subject].append((t.predicate, t.object))
                inc[t.object].append((t.predicate, t.subject))
                nodes.add(t.subject)
                nodes.add(t.object)
        self.partitions: dict[str, tuple[Triple, ...]] = {p: tuple(sorted(ts)) for p, ts in partitions.items()}
        self._out = {n: tuple(sorted(es, key=lambda e: (e[1], e[0]))) for n, es in out.items()}
        self._in = {n: tuple(sorted(es, key=lambda e: (e[1], e[0]))) for n, es in inc.items()}
        self._attrs = {n: {k: sorted(v) for k, v in a.items()} for n, a in attrs.items()}
        self.nodes = frozenset(nodes)

    def __len__(self) -> int:
        return len(self.triples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ErGraph):
            return NotImplemented
        return self.triples == other.triples and self.acyclic == other.acyclic

    def __hash__(self) -> int:
        return hash(self.triples)

    def __repr__(self) -> str:
        return f"ErGraph(|V|={len(self.nodes)}, |E|={self.edge_count}, triples={len(self.triples)})"

    def __contains__(self, node: Node | str) -> bool:
        return as_node(node) in self.nodes

    @cached_property
    def relationship_edges(self) -> tuple[Triple, ...]:
        return tuple(sorted(t for t in self.triples if not t.is_attribute))

    @property
    def edge_count(self) -> int:
        return len(self.relationship_edges)

    def out_edges(self, node: Node) -> tuple[tuple[Node, Node], ...]:
        """(predicate, object) pairs ordered by object then predicate."""
        return self._out.get(node, ())

    def in_edges(self, node: Node) -> tuple[tuple[Node, Node], ...]:
        return self._in.get(node, ())

    def attributes(self, node: Node) -> dict[str, list[str]]:
        return self._attrs.get(node, {})

    def attribute(self, node: Node, name: str) -> str | None:
        """First value (in sorted order) of attribute ``name``, or None."""
        values = self._attrs.get(node, {}).get(name)
        return values[0] if values else None

    def entity_type(self, node: Node) -> str | None:
        return self.attribute(node, "type")

    def entities(self, entity_type: str | None = None) -> list[Node]:
        nodes = sorted(self.nodes)
        if entity_type is None:
            return nodes
        return [n for n in nodes if entity_type in self._attrs.get(n, {}).get("type", ())]

    def partition(self, predicate: str) -> tuple[Triple, ...]:
        return self.partitions.get(predicate, ())

    @cached_property
    def node_index(self) -> dict[Node, int]:
        """Dense integer code per term (nodes, predicates, literal values), stable for this snapshot."""
        terms = set(self.nodes)
        for t in self.triples:
            terms.add(t.object)
            terms.add(t.subject)
            terms.add(t.predicate)
        return {n: i for i, n in enumerate(sorted(terms))}

    @cached_property
    def node_table(self) -> list[Node]:
        table = [None] * len(self.node_index)
        for n, i in self.node_index.items():
            table[i] = n
        return table

    @cached_property
    def encoded_partitions(self) -> dict[str, list[tuple[int, int]]]:
        index = self.node_index
        return {p: [(index[t.subject], index[t.object]) for t in ts] for p, ts in self.partitions.items()}


def find_cycle(triples: Iterable[Triple]) -> list[Node] | None:
    """Return one directed cycle among relationship edges, or None if acyclic."""
    out: dict[Node, set[Node]] = defaultdict(set)
    indeg: dict[Node, int] = defaultdict(int)
    for t in triples:
        if t.is_attribute:
            continue
        if t.object not in out[t.subject]:
            out[t.subject].add(t.object)
            indeg[t.object] += 1
        indeg.setdefault(t.subject, 0)
    ready = [n for n, d in indeg.items() if d == 0]
    remaining = dict(indeg)
    while ready:
        n = ready.pop()
        del remaining[n]
        for m in out.get(n, ()):
            remaining[m] -= 1
            if remaining[m] == 0:
                ready.append(m)
    if not remaining:
        return None
    preds: dict[Node, list[Node]] = defaultdict(list)
    for n, targets in out.items():
        if n in remaining:
            for m in targets:
                if m in remaining:
                    preds[m].append(n)
    # every leftover node has a leftover predecessor, so walking backwards must repeat
    node = min(remaining)
    seen: dict[Node, int] = {}
    walk: list[Node] = []
    while node not in seen:
        seen[node] = len(walk)
        walk.append(node)
        node = min(preds[node])
    cycle = walk[seen[node]:]
    cycle.reverse()
    return cycle + [cycle[0]]


def build_graph(triples: Iterable[Triple], allow_cycles: bool = False) -> ErGraph:
    """Validate, deduplicate and index ``triples``.

    Raises MalformedTriple for the first invalid element and
    CyclicRelationshipError when relationship edges form a cycle, unless
    ``allow_cycles`` is set, in which case the graph is flagged as cyclic.
    """
    accepted = []
    for i, t in enumerate(triples):
        reason = check_triple(t)
        if reason is not None:
            raise MalformedTriple(i, reason)
        accepted.append(t)
    triple_set = frozenset(accepted)
    cycle = find_cycle(triple_set)
    if cycle is not None and not allow_cycles:
        raise CyclicRelationshipError([str(n) for n in cycle])
    return ErGraph(triple_set, acyclic=cycle is None)


def _triples_of(g: ErGraph | Iterable[Triple]) -> frozenset[Triple]:
    if isinstance(g, ErGraph):
        return g.triples
    return frozenset(g)


def _allow(*graphs) -> bool:
    return any(isinstance(g, ErGraph) and not g.acyclic for g in graphs)


def graph_union(g1: ErGraph, g2: ErGraph | Iterable[Triple], allow_cycles: bool | None = None) -> ErGraph:
    allow = _allow(g1, g2) if allow_cycles is None else allow_cycles
    return build_graph(_triples_of(g1) | _triples_of(g2), allow_cycles=allow)


def graph_intersect(g1: ErGraph, g2: ErGraph | Iterable[Triple]) -> ErGraph:
    return build_graph(_triples_of(g1) & _triples_of(g2), allow_cycles=_allow(g1, g2))


def graph_difference(g1: ErGraph, g2: ErGraph | Iterable[Triple]) -> ErGraph:
    return build_graph(_triples_of(g1) - _triples_of(g2), allow_cycles=_allow(g1, g2))


def _require(g: ErGraph, node: Node | str) -> Node:
    n = as_node(node)
    if n not in g.nodes:
        raise UnknownNode(n)
    return n


def neighbors(
    g: ErGraph, node: Node | str, direction: str = "out", predicate: Node | str | None = None
) -> set[tuple[Node, Node]]:
    """Relationship neighbours of ``node`` as (predicate, node) pairs."""
    n = _require(g, node)
    if direction not in ("out", "in"):
        raise ValueError(f"direction must be 'out' or 'in', not {direction!r}")
    edges = g.out_edges(n) if direction == "out" else g.in_edges(n)
    if predicate is not None:
        p = as_node(predicate)
        edges = [e for e in edges if e[0] == p]
    return set(edges)


def get_entity(g: ErGraph, node: Node | str) -> EntityRecord:
    n = _require(g, node)
    attrs = {name: values[0] for name, values in g.attributes(n).items()}
    return EntityRecord(n, attrs.get("type"), attrs)


def get_event(g: ErGraph, node: Node | str) -> EventRecord:
    n = _require(g, node)
    attrs = {name: values[0] for name, values in g.attributes(n).items()}
    if attrs.get("type") != "event":
        raise NotAnEvent(n, "missing @type='event'")
    if "timestamp" not in attrs:
        raise NotAnEvent(n, "missing @timestamp")
    actors = sorted(s for p, s in g.in_edges(n) if p.id == PERFORMED)
    data = {k: v for k, v in attrs.items() if k not in ("type", "timestamp")}
    return EventRecord(n, actors[0] if actors else None, attrs["timestamp"], data)


def topological_order(g: ErGraph, nodes: Iterable[Node] | None = None) -> list[Node]:
    """Kahn order of relationship edges restricted to ``nodes``; ties broken by node order."""
    scope = set(g.nodes if nodes is None else nodes)
    indeg = {n: 0 for n in scope}
    for n in scope:
        for _, m in g.out_edges(n):
            if m in scope:
                indeg[m] += 1
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for _, m in g.out_edges(n):
            if m in scope:
                indeg[m] -= 1
                if indeg[m] == 0:
                    heapq.heappush(heap, m)
    if len(order) != len(scope):
        raise CyclicRelationshipError([str(n) for n in sorted(scope - set(order))])
    return order


# -- triple text format ----------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", '"': '"', "t": "\t", "n": "\n", "r": "\r"}


def quote_literal(text: str) -> str:
    return '"' + "".join(_ESCAPES.get(c, c) for c in text) + '"'


def unquote_literal(token: str) -> str:
    if len(token) < 2 or not token.startswith('"') or not token.endswith('"'):
        raise ValueError(f"not a quoted literal: {token!r}")
    body = token[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            if i + 1 >= len(body) or body[i + 1] not in _UNESCAPES:
                raise ValueError(f"bad escape in {token!r}")
            out.append(_UNESCAPES[body[i + 1]])
            i += 2
            continue
        if c == '"':
            raise ValueError(f"unescaped quote in {token!r}")
        out.append(c)
        i += 1
    return "".join(out)


def render_term(node: Node) -> str:
    if node.kind == LITERAL:
        return quote_literal(node.id)
    if node.kind == BLANK:
        return "_:" + node.id
    return node.id


def format_triple(t: Triple) -> str:
    return "\t".join((render_term(t.subject), render_term(t.predicate), render_term(t.object)))


def parse_term(token: str) -> Node:
    if token.startswith('"'):
        return literal(unquote_literal(token))
    if token.startswith("_:"):
        return blank(token[2:])
    return uri(token)


def parse_triple_line(line: str) -> Triple:
    """Parse one ``subject<TAB>predicate<TAB>object`` line; raises ValueError."""
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 3:
        raise ValueError(f"expected 3 tab-separated fields, found {len(fields)}")
    s, p, o = (f.strip() for f in fields)
    if not s or not p or not o:
        raise ValueError("empty field")
    if p.startswith('"') or p.startswith("_:"):
        raise ValueError("predicate must be a URI")
    obj = parse_term(o)
    if p.startswith("@") and obj.kind == URI:
        obj = literal(o)
    t = Triple(parse_term(s), uri(p), obj)
    reason = check_triple(t)
    if reason is not None:
        raise ValueError(reason)
    return t


def iter_triple_lines(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    """Yield (line number, text) for data lines, skipping blanks and ``#`` comments."""
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield number, line


def dump_triples(triples: Iterable[Triple]) -> str:
    return "".join(format_triple(t) + "\n" for t in sorted(triples))
