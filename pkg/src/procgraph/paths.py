"""Path regular expressions over relationship edges.

A path is read as the label string ``n0 p1 n1 p2 n2 ... nk``: node ids at even
positions, predicates at odd positions. A regex is a sequence of tokens over
that alphabet:

* ``node`` matches any entity, ``edge`` any relationship predicate;
* ``@type=T`` (node position) matches entities whose ``@type`` is ``T``;
* any other word is a literal node id or predicate, decided by position.

Tokens combine by concatenation, ``|``, parentheses and the ``*``, ``+``,
``?`` quantifiers. Quantified groups must cover whole edge/node steps, as in
``(edge node)*``.

A literal in node position that names no node of the graph falls back to a
case-insensitive match on node id or ``@type``, so ``Artifact`` selects
``@type='artifact'`` entities and ``STAFF`` selects ``Staff``.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Union

from .errors import DuplicateName, RegexSyntaxError, UnboundedSearch, UnknownNode
from .graph import ErGraph, Node, Triple, as_node, render_term

DEFAULT_MAX_HOPS = 16

# -- regex syntax tree -------------------------------------------------------


@dataclass(frozen=True)
class Tok:
    kind: str  # "node", "edge", "lit" or "type"
    value: str
    pos: int
    position: str = ""  # "node" or "edge", assigned after parsing

    def render(self) -> str:
        if self.kind in ("node", "edge"):
            return self.kind
        if self.kind == "type":
            return "@type=" + self.value
        return self.value


@dataclass(frozen=True)
class Seq:
    items: tuple


@dataclass(frozen=True)
class Alt:
    options: tuple


@dataclass(frozen=True)
class Repeat:
    item: object
    quant: str


RegexNode = Union[Tok, Seq, Alt, Repeat]

_TOKEN = re.compile(r"\s*(?:([()|*+?])|([^\s()|*+?]+))")


def _lex(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            if text[i:].strip():
                raise RegexSyntaxError(f"unexpected character {text[i]!r}", i)
            break
        if m.group(1):
            tokens.append(("op", m.group(1), m.start(1)))
        elif m.group(2):
            tokens.append(("word", m.group(2), m.start(2)))
        i = m.end()
    return tokens


class _RegexParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def parse(self) -> RegexNode:
        if not self.tokens:
            raise RegexSyntaxError("empty expression", 0)
        tree = self.alt()
        tok = self.peek()
        if tok is not None:
            raise RegexSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return tree

    def alt(self) -> RegexNode:
        options = [self.seq()]
        while (tok := self.peek()) is not None and tok[1] == "|" and tok[0] == "op":
            self.i += 1
            options.append(self.seq())
        return options[0] if len(options) == 1 else Alt(tuple(options))

    def seq(self) -> RegexNode:
        items = []
        while (tok := self.peek()) is not None and not (tok[0] == "op" and tok[1] in "|)"):
            items.append(self.item())
        if not items:
            tok = self.peek()
            raise RegexSyntaxError("empty alternative", tok[2] if tok else len(self.text))
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def item(self) -> RegexNode:
        atom = self.atom()
        while (tok := self.peek()) is not None and tok[0] == "op" and tok[1] in "*+?":
            self.i += 1
            atom = Repeat(atom, tok[1])
        return atom

    def atom(self) -> RegexNode:
        kind, value, pos = self.tokens[self.i]
        self.i += 1
        if kind == "op":
            if value != "(":
                raise RegexSyntaxError(f"unexpected {value!r}", pos)
            inner = self.alt()
            close = self.peek()
            if close is None or close[1] != ")":
                raise RegexSyntaxError("unclosed group", pos)
            self.i += 1
            return inner
        if value in ("node", "edge"):
            return Tok(value, value, pos)
        if value.startswith("@type="):
            if len(value) == len("@type="):
                raise RegexSyntaxError("empty type pattern", pos)
            return Tok("type", value[len("@type="):], pos)
        return Tok("lit", value, pos)


def _parity(tree: RegexNode) -> int:
    if isinstance(tree, Tok):
        return 1
    if isinstance(tree, Seq):
        return sum(_parity(t) for t in tree.items) % 2
    if isinstance(tree, Alt):
        parities = {_parity(o) for o in tree.options}
        if len(parities) != 1:
            raise RegexSyntaxError("alternatives mix node and edge positions", _first_pos(tree))
        return parities.pop()
    if _parity(tree.item) != 0:
        raise RegexSyntaxError(
            f"'{tree.quant}' must apply to whole edge-node steps", _first_pos(tree.item)
        )
    return 0


def _first_pos(tree: RegexNode) -> int:
    if isinstance(tree, Tok):
        return tree.pos
    if isinstance(tree, Seq):
        return _first_pos(tree.items[0])
    if isinstance(tree, Alt):
        return _first_pos(tree.options[0])
    return _first_pos(tree.item)


def _place(tree: RegexNode, parity: int) -> tuple[RegexNode, int]:
    """Assign node/edge positions; returns the rewritten tree and the parity after it."""
    if isinstance(tree, Tok):
        position = "node" if parity == 0 else "edge"
        if tree.kind == "node" and position == "edge":
            raise RegexSyntaxError("'node' in an edge position", tree.pos)
        if tree.kind == "edge" and position == "node":
            raise RegexSyntaxError("'edge' in a node position", tree.pos)
        if tree.kind == "type" and position == "edge":
            raise RegexSyntaxError("type pattern in an edge position", tree.pos)
        return replace(tree, position=position), 1 - parity
    if isinstance(tree, Seq):
        items = []
        for item in tree.items:
            item, parity = _place(item, parity)
            items.append(item)
        return Seq(tuple(items)), parity
    if isinstance(tree, Alt):
        options = []
        end = parity
        for option in tree.options:
            option, end = _place(option, parity)
            options.append(option)
        return Alt(tuple(options)), end
    item, _ = _place(tree.item, parity)
    return Repeat(item, tree.quant), parity


def render_regex(tree: RegexNode) -> str:
    if isinstance(tree, Tok):
        return tree.render()
    if isinstance(tree, Seq):
        return " ".join(_wrap(t, Alt) for t in tree.items)
    if isinstance(tree, Alt):
        return " | ".join(render_regex(o) for o in tree.options)
    return _wrap(tree.item, (Seq, Alt)) + tree.quant


def _wrap(tree: RegexNode, kinds) -> str:
    text = render_regex(tree)
    return f"({text})" if isinstance(tree, kinds) else text


@dataclass(frozen=True)
class PathRegex:
    text: str
    tree: RegexNode = field(compare=False, repr=False)

    def __str__(self) -> str:
        return self.text

    @property
    def first_tokens(self) -> list[Tok]:
        return _first_tokens(self.tree)


def _first_tokens(tree: RegexNode) -> list[Tok]:
    return _firsts(tree)[0]


def _firsts(tree: RegexNode) -> tuple[list[Tok], bool]:
    """Tokens that can be matched first, and whether ``tree`` accepts the empty string."""
    if isinstance(tree, Tok):
        return [tree], False
    if isinstance(tree, Seq):
        out: list[Tok] = []
        for item in tree.items:
            toks, nullable = _firsts(item)
            out.extend(toks)
            if not nullable:
                return out, False
        return out, True
    if isinstance(tree, Alt):
        out = []
        nullable = False
        for option in tree.options:
            toks, n = _firsts(option)
            out.extend(toks)
            nullable = nullable or n
        return out, nullable
    toks, nullable = _firsts(tree.item)
    return toks, nullable or tree.quant in "*?"


def compile_regex(text: str) -> PathRegex:
    """Parse and position-check a path regex; raises RegexSyntaxError."""
    if isinstance(text, PathRegex):
        return text
    tree = _RegexParser(text).parse()
    if _parity(tree) != 1:
        raise RegexSyntaxError("expression must start and end at a node", 0)
    placed, _ = _place(tree, 0)
    return PathRegex(render_regex(placed), placed)


# -- automaton ------------------------------------------------------------


@dataclass
class Automaton:
    """Thompson NFA. ``moves[s]`` lists (token, target); ``eps[s]`` lists targets."""

    tokens: list[Tok] = field(default_factory=list)
    moves: list[list[tuple[int, int]]] = field(default_factory=list)
    eps: list[list[int]] = field(default_factory=list)
    start: int = 0
    accept: int = 0

    def new_state(self) -> int:
        self.moves.append([])
        self.eps.append([])
        return len(self.moves) - 1

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        stack = list(states)
        seen = set(stack)
        while stack:
            s = stack.pop()
            for t in self.eps[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    def step(self, states: frozenset[int], test: Callable[[Tok], bool]) -> frozenset[int]:
        targets = [t for s in states for tok_index, t in self.moves[s] if test(self.tokens[tok_index])]
        return self.closure(targets) if targets else frozenset()


def _build(a: Automaton, tree: RegexNode) -> tuple[int, int]:
    if isinstance(tree, Tok):
        s, e = a.new_state(), a.new_state()
        a.tokens.append(tree)
        a.moves[s].append((len(a.tokens) - 1, e))
        return s, e
    if isinstance(tree, Seq):
        first_start, end = _build(a, tree.items[0])
        for item in tree.items[1:]:
            s, e = _build(a, item)
            a.eps[end].append(s)
            end = e
        return first_start, end
    if isinstance(tree, Alt):
        s, e = a.new_state(), a.new_state()
        for option in tree.options:
            os_, oe = _build(a, option)
            a.eps[s].append(os_)
            a.eps[oe].append(e)
        return s, e
    s, e = a.new_state(), a.new_state()
    is_, ie = _build(a, tree.item)
    a.eps[s].append(is_)
    a.eps[ie].append(e)
    if tree.quant in "*?":
        a.eps[s].append(e)
    if tree.quant in "*+":
        a.eps[ie].append(is_)
    return s, e


@lru_cache(maxsize=256)
def automaton(regex: PathRegex) -> Automaton:
    a = Automaton()
    a.start, a.accept = _build(a, regex.tree)
    return a


# -- node/edge tests ----------------------------------------------------------


class _Resolver:
    """Per-graph evaluation of node tokens, including the literal-id fallback."""

    def __init__(self, g: ErGraph):
        self.g = g
        self._ids: set[str] | None = None
        self._cache: dict[tuple[str, str], bool | frozenset] = {}

    @property
    def ids(self) -> set[str]:
        if self._ids is None:
            self._ids = {n.id for n in self.g.nodes}
        return self._ids

    def node_matches(self, tok: Tok, node: Node) -> bool:
        if tok.kind == "node":
            return True
        if tok.kind == "type":
            return tok.value in self.g.attributes(node).get("type", ())
        if tok.value in self.ids:
            return node.id == tok.value
        folded = tok.value.casefold()
        if node.id.casefold() == folded:
            return True
        return any(t.casefold() == folded for t in self.g.attributes(node).get("type", ()))

    @staticmethod
    def edge_matches(tok: Tok, predicate: Node) -> bool:
        return tok.kind == "edge" or predicate.id == tok.value


def node_pattern(value: Node | str | None) -> Tok | None:
    """Endpoint restriction for path nodes: a node id, ``@type=T`` or ``node``."""
    if value is None:
        return None
    if isinstance(value, Node):
        return Tok("lit", value.id, 0, "node")
    if value == "node":
        return Tok("node", value, 0, "node")
    if value.startswith("@type="):
        return Tok("type", value[len("@type="):], 0, "node")
    return Tok("lit", value, 0, "node")


# -- paths ----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Path:
    """A chain of relationship triples; ``object(t_i) == subject(t_{i+1})``."""

    triples: tuple[Triple, ...]

    def __post_init__(self):
        for a, b in zip(self.triples, self.triples[1:]):
            if a.object != b.subject:
                raise ValueError(f"broken path: {a} does not chain into {b}")

    @property
    def nodes(self) -> tuple[Node, ...]:
        if not self.triples:
            return ()
        return (self.triples[0].subject,) + tuple(t.object for t in self.triples)

    @property
    def predicates(self) -> tuple[Node, ...]:
        return tuple(t.predicate for t in self.triples)

    @property
    def start(self) -> Node:
        return self.triples[0].subject

    @property
    def end(self) -> Node:
        return self.triples[-1].object

    @property
    def sort_key(self) -> tuple:
        return (self.nodes, self.predicates)

    def __len__(self) -> int:
        return len(self.triples)

    def __str__(self) -> str:
        return format_path(self)

    def to_json(self) -> list[dict[str, str]]:
        return [
            {"s": render_term(t.subject), "p": render_term(t.predicate), "o": render_term(t.object)}
            for t in self.triples
        ]


def format_path(path: Path) -> str:
    parts = [render_term(path.start)]
    for t in path.triples:
        parts.append(f" ->({t.predicate.id})-> {render_term(t.object)}")
    return "".join(parts)


def paths_to_json(paths: Iterable[Path]) -> str:
    return json.dumps([p.to_json() for p in paths])


def _check_hops(g: ErGraph, max_hops: int | None) -> int | None:
    if not g.acyclic and max_hops is None:
        raise UnboundedSearch("graph admits cycles; supply max_hops")
    return max_hops


def find_paths(
    g: ErGraph,
    regex: PathRegex | str,
    limit: int | None = None,
    start: Node | str | None = None,
    end: Node | str | None = None,
    max_hops: int | None = None,
) -> list[Path]:
    """All paths (one edge or longer) whose label string the regex accepts.

    ``start``/``end`` pin or restrict the endpoints (node id, ``@type=T``).
    Results are ordered by node-id sequence, then predicate sequence. On a
    graph built with cycles allowed, only simple paths are returned and
    ``max_hops`` is required.
    """
    regex = compile_regex(regex)
    hops = _check_hops(g, max_hops)
    a = automaton(regex)
    res = _Resolver(g)
    start_tok, end_tok = node_pattern(start), node_pattern(end)
    initial = a.closure([a.start])
    found: list[Path] = []
    simple = not g.acyclic

    def walk(node: Node, states: frozenset[int], trail: list[Triple], visited: set[Node]) -> None:
        if hops is not None and len(trail) >= hops:
            return
        for pred, nxt in g.out_edges(node):
            if simple and nxt in visited:
                continue
            after_edge = a.step(states, lambda tok: res.edge_matches(tok, pred))
            if not after_edge:
                continue
            after_node = a.step(after_edge, lambda tok: res.node_matches(tok, nxt))
            if not after_node:
                continue
            trail.append(Triple(node, pred, nxt))
            if a.accept in after_node and (end_tok is None or res.node_matches(end_tok, nxt)):
                found.append(Path(tuple(trail)))
            visited.add(nxt)
            walk(nxt, after_node, trail, visited)
            visited.discard(nxt)
            trail.pop()

    for node in _start_candidates(g, regex, res, start):
        if start_tok is not None and not res.node_matches(start_tok, node):
            continue
        states = a.step(initial, lambda tok: res.node_matches(tok, node))
        if states:
            walk(node, states, [], {node})
    found.sort(key=lambda p: p.sort_key)
    return found if limit is None else found[:limit]


def _start_candidates(g: ErGraph, regex: PathRegex, res: _Resolver, start) -> list[Node]:
    if start is not None and not (isinstance(start, str) and (start == "node" or start.startswith("@type="))):
        node = as_node(start)
        return [node] if node in g.nodes else []
    firsts = regex.first_tokens
    if all(t.kind == "lit" and t.value in res.ids for t in firsts):
        names = {t.value for t in firsts}
        return sorted(n for n in g.nodes if n.id in names and g.out_edges(n))
    return sorted(n for n in g.nodes if g.out_edges(n))


def accepts_single_node(g: ErGraph, regex: PathRegex, node: Node) -> bool:
    """Whether the zero-edge label string ``node`` is in the language."""
    a = automaton(regex)
    res = _Resolver(g)
    states = a.step(a.closure([a.start]), lambda tok: res.node_matches(tok, node))
    return a.accept in states


@lru_cache(maxsize=4096)
def _reachable(g: ErGraph, source: Node) -> frozenset[Node]:
    seen = {source}
    queue = deque([source])
    while queue:
        n = queue.popleft()
        for _, m in g.out_edges(n):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return frozenset(seen)


@lru_cache(maxsize=4096)
def _regex_ends(g: ErGraph, regex: PathRegex, source: Node) -> frozenset[Node]:
    """End nodes of accepted walks of one edge or more, via a product-automaton search."""
    a = automaton(regex)
    res = _Resolver(g)
    first = a.step(a.closure([a.start]), lambda tok: res.node_matches(tok, source))
    if not first:
        return frozenset()
    ends = set()
    seen = {(source, first)}
    queue = deque([(source, first)])
    while queue:
        node, states = queue.popleft()
        for pred, nxt in g.out_edges(node):
            after_edge = a.step(states, lambda tok: res.edge_matches(tok, pred))
            if not after_edge:
                continue
            after_node = a.step(after_edge, lambda tok: res.node_matches(tok, nxt))
            if not after_node:
                continue
            if a.accept in after_node:
                ends.add(nxt)
            if (nxt, after_node) not in seen:
                seen.add((nxt, after_node))
                queue.append((nxt, after_node))
    return frozenset(ends)


def reachable_ends(
    g: ErGraph, regex: PathRegex | str, source: Node | str, max_hops: int | None = None
) -> frozenset[Node]:
    """Every node ``e`` such that some regex-accepted path runs from ``source`` to ``e``."""
    regex = compile_regex(regex)
    source = as_node(source)
    if g.acyclic:
        return _regex_ends(g, regex, source)
    return frozenset(p.end for p in find_paths(g, regex, start=source, max_hops=_check_hops(g, max_hops)))


def is_reachable(
    g: ErGraph,
    source: Node | str,
    target: Node | str,
    regex: PathRegex | str | None = None,
    max_hops: int | None = None,
) -> bool:
    """Reachability along relationship edges, optionally constrained by a path regex.

    Without a regex every node reaches itself through the empty path; with a
    regex the zero-edge case holds only when the regex accepts the bare node.
    """
    source, target = as_node(source), as_node(target)
    for n in (source, target):
        if n not in g.nodes:
            raise UnknownNode(n)
    if regex is None:
        if source == target:
            return True
        if g.acyclic:
            return target in _reachable(g, source)
        return bool(find_paths(g, "node (edge node)+", start=source, end=target, max_hops=_check_hops(g, max_hops)))
    regex = compile_regex(regex)
    if source == target and accepts_single_node(g, regex, source):
        return True
    return target in reachable_ends(g, regex, source, max_hops=max_hops)


# -- path nodes -------------------------------------------------------------


@dataclass(frozen=True)
class PathNodeSpec:
    name: str
    regex: PathRegex | str
    v_start: Node | str | None = None
    v_end: Node | str | None = None
    timed: bool = False

    def compiled(self) -> PathRegex:
        return compile_regex(self.regex)


@dataclass(frozen=True)
class PathNode:
    """Named, materialized set of paths.

    For timed nodes ``stamps`` maps every path ever seen to its
    (first_seen, last_seen) snapshot ids; ``paths`` is the current match set.
    """

    name: str
    spec: PathNodeSpec
    paths: tuple[Path, ...]
    snapshot_id: int = 0
    stamps: dict[Path, tuple[int, int]] = field(default_factory=dict, compare=False)
    ids: dict[str, Path] = field(default_factory=dict, compare=False)

    @property
    def timed(self) -> bool:
        return self.spec.timed

    def __len__(self) -> int:
        return len(self.paths)

    def render(self) -> str:
        lines = [f"{self.name}:"]
        for path_id, path in self.ids.items():
            lines.append(f"  {path_id}: {format_path(path)}")
        return "\n".join(lines)


def _number(paths: Iterable[Path]) -> dict[str, Path]:
    return {f"path#{i}": p for i, p in enumerate(paths, start=1)}


def evaluate_path_spec(spec: PathNodeSpec, g: ErGraph, max_hops: int | None = None) -> list[Path]:
    return find_paths(g, spec.compiled(), start=spec.v_start, end=spec.v_end, max_hops=max_hops)


def materialize_path_node(catalog, spec: PathNodeSpec, g: ErGraph, snapshot_id: int = 0, max_hops: int | None = None) -> PathNode:
    """Evaluate ``spec`` on ``g`` and store the result in ``catalog`` under ``spec.name``.

    An existing timed node of the same name is refreshed instead.
    """
    existing = catalog.path_nodes.get(spec.name) if catalog is not None else None
    if existing is not None:
        if not (existing.timed and spec.timed):
            raise DuplicateName(f"path node {spec.name!r} already exists")
        node, _ = refresh_path_node(existing, g, snapshot_id, max_hops=max_hops)
        catalog.put_path_node(node, replace=True)
        return node
    paths = tuple(evaluate_path_spec(spec, g, max_hops))
    stamps = {p: (snapshot_id, snapshot_id) for p in paths} if spec.timed else {}
    node = PathNode(spec.name, spec, paths, snapshot_id, stamps, _number(paths))
    if catalog is not None:
        catalog.put_path_node(node)
    return node


@dataclass(frozen=True)
class PathDelta:
    added: tuple[Path, ...]
    removed: tuple[Path, ...]


def refresh_path_node(node: PathNode, g: ErGraph, snapshot_id: int, max_hops: int | None = None) -> tuple[PathNode, PathDelta]:
    """Re-run the node's query on a new snapshot and report the set delta."""
    current = evaluate_path_spec(node.spec, g, max_hops)
    old = set(node.paths)
    new = set(current)
    stamps = dict(node.stamps)
    if node.timed:
        for p in current:
            first = stamps[p][0] if p in stamps else snapshot_id
            stamps[p] = (first, snapshot_id)
    delta = PathDelta(
        tuple(sorted(new - old, key=lambda p: p.sort_key)),
        tuple(sorted(old - new, key=lambda p: p.sort_key)),
    )
    return PathNode(node.name, node.spec, tuple(current), snapshot_id, stamps, _number(current)), delta
