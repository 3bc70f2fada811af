import random

import pytest

from oracles import brute_find_paths, random_dag, random_regex
from procgraph.datasets import banking_graph
from procgraph.errors import RegexSyntaxError, UnboundedSearch, UnknownNode
from procgraph.graph import build_graph, graph_union, triple
from procgraph.paths import (
    Repeat,
    Seq,
    PathNodeSpec,
    compile_regex,
    find_paths,
    format_path,
    is_reachable,
    materialize_path_node,
    refresh_path_node,
)
from procgraph.registry import Catalog


def ids(path):
    return [n.id for n in path.nodes]


def test_compile_example3_structure():
    rx = compile_regex("Adam (edge node)* assigned-to Staff")
    assert isinstance(rx.tree, Seq)
    first, loop, edge, last = rx.tree.items
    assert (first.kind, first.value, first.position) == ("lit", "Adam", "node")
    assert isinstance(loop, Repeat) and loop.quant == "*"
    assert (edge.kind, edge.value, edge.position) == ("lit", "assigned-to", "edge")
    assert (last.value, last.position) == ("Staff", "node")


def test_compile_plus():
    rx = compile_regex("Adam (edge node)+ approved-by Manager")
    assert rx.tree.items[1].quant == "+"


@pytest.mark.parametrize("text", ["Adam (edge", "Adam edge", "(edge node)", "Adam ) edge b", "Adam edge node |"])
def test_regex_syntax_errors(text):
    with pytest.raises(RegexSyntaxError):
        compile_regex(text)


def test_example3_path():
    paths = find_paths(banking_graph(), "Adam (edge node)* assigned-to Staff")
    assert [ids(p) for p in paths] == [["Adam", "document", "work-item", "Staff"]]
    assert [t.predicate.id for t in paths[0].triples] == ["submitted", "part-of", "assigned-to"]


def test_example4_path():
    paths = find_paths(banking_graph(), "Adam (edge node)+ approved-by Manager")
    assert [ids(p) for p in paths] == [["Adam", "document", "work-item", "Staff", "report", "Manager"]]
    assert len(paths[0]) == 5


def test_example5_paths():
    paths = find_paths(banking_graph(), "Adam (edge node)* edge Artifact")
    assert [ids(p) for p in paths] == [
        ["Adam", "Home-Loan-Document"],
        ["Adam", "document", "work-item", "Staff", "report"],
    ]


def test_reverse_direction_finds_nothing():
    assert find_paths(banking_graph(), "Manager (edge node)* edge Adam") == []


def test_staff_folded_case():
    paths = find_paths(banking_graph(), "Adam (edge node)* assigned-to STAFF")
    assert [p.end.id for p in paths] == ["Staff"]


def test_attribute_edges_not_traversed():
    assert find_paths(banking_graph(), "Home-Loan-Document edge node") == []


def test_limit_and_order():
    g = banking_graph()
    everything = find_paths(g, "node (edge node)+")
    assert everything == sorted(everything, key=lambda p: p.sort_key)
    assert find_paths(g, "node (edge node)+", limit=2) == everything[:2]


def test_is_reachable_examples():
    g = banking_graph()
    assert is_reachable(g, "Adam", "Manager")
    assert not is_reachable(g, "Manager", "Adam")
    assert is_reachable(g, "Staff", "Staff")
    assert is_reachable(g, "Adam", "Staff", "Adam (edge node)* assigned-to Staff")
    assert not is_reachable(g, "Adam", "report", "Adam (edge node)* assigned-to node")
    with pytest.raises(UnknownNode):
        is_reachable(g, "Adam", "nobody")


def test_cyclic_graph_needs_bound():
    g = build_graph([triple("a", "p", "b"), triple("b", "p", "a")], allow_cycles=True)
    with pytest.raises(UnboundedSearch):
        find_paths(g, "a (edge node)+")
    paths = find_paths(g, "a (edge node)+", max_hops=16)
    assert [ids(p) for p in paths] == [["a", "b"]]


def test_path_node_examples():
    catalog = Catalog()
    g = banking_graph()
    spec = PathNodeSpec("staffed", "Adam (edge node)* assigned-to Staff", timed=True)
    node = materialize_path_node(catalog, spec, g, snapshot_id=1)
    assert len(node) == 1 and catalog.path_nodes["staffed"] is node
    assert list(node.ids) == ["path#1"]

    extended = graph_union(g, [triple("Adam", "submitted", "form"), triple("form", "part-of", "item2"), triple("item2", "assigned-to", "Staff")])
    refreshed, delta = refresh_path_node(node, extended, snapshot_id=2)
    assert len(refreshed) == 2
    assert len(delta.added) == 1 and not delta.removed
    new = delta.added[0]
    assert refreshed.stamps[new] == (2, 2)
    assert refreshed.stamps[node.paths[0]] == (1, 2)

    empty = materialize_path_node(catalog, PathNodeSpec("none", "Manager edge node"), g)
    assert len(empty) == 0


@pytest.mark.parametrize("seed", range(60))
def test_find_paths_matches_exhaustive_dfs(seed):
    rng = random.Random(seed)
    g = random_dag(rng)
    for _ in range(3):
        text = random_regex(rng, g)
        got = find_paths(g, text)
        for p in got:
            assert all(a.object == b.subject for a, b in zip(p.triples, p.triples[1:]))
        assert {p.triples for p in got} == brute_find_paths(g, text), text
        assert got == sorted(got, key=lambda p: p.sort_key)


@pytest.mark.parametrize("seed", range(30))
def test_plus_is_subset_of_star(seed):
    rng = random.Random(1000 + seed)
    g = random_dag(rng, max_nodes=25, max_edges=60)
    start = rng.choice(["node", "@type=a", "@type=b"])
    star = set(find_paths(g, f"{start} (edge node)* edge node"))
    plus = set(find_paths(g, f"{start} (edge node)+ edge node"))
    assert plus <= star
    assert all(len(p) == 1 for p in star - plus)


@pytest.mark.parametrize("seed", range(30))
def test_timed_path_node_monotone(seed):
    rng = random.Random(2000 + seed)
    g = random_dag(rng, max_nodes=20, max_edges=40)
    spec = PathNodeSpec("n", random_regex(rng, g), timed=True)
    node = materialize_path_node(None, spec, g, snapshot_id=1)
    names = sorted(n.id for n in g.nodes)
    extra = []
    for _ in range(5):
        i = rng.randrange(len(names) - 1)
        j = rng.randint(i + 1, len(names) - 1)
        extra.append(triple(names[i], rng.choice("pq"), names[j]))
    bigger = graph_union(g, extra)
    refreshed, delta = refresh_path_node(node, bigger, snapshot_id=2)
    assert set(node.paths) <= set(refreshed.paths)
    assert not delta.removed


def test_format_path():
    path = find_paths(banking_graph(), "Adam (edge node)* assigned-to Staff")[0]
    assert format_path(path) == "Adam ->(submitted)-> document ->(part-of)-> work-item ->(assigned-to)-> Staff"
