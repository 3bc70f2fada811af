from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dfg_counts, groupby_counts
from procgraph.datasets import banking_graph, event_log_csv
from procgraph.errors import (
    DuplicateName,
    EmptyInput,
    NoDefiningQuery,
    NotAnEvent,
    UnknownAggregate,
    UnknownAlgorithm,
    UnknownAttribute,
    UnknownRegisteredCondition,
)
from procgraph.graph import build_graph, graph_difference, graph_union, triple, uri
from procgraph.ingest import event_row_triples, read_event_log
from procgraph.registry import AlgorithmRegistry, Catalog
from procgraph.summarize import (
    BOTTOM,
    CorrelationCondition,
    FolderNode,
    PathCondition,
    apply_path_condition,
    build_process_instances,
    directly_follows,
    discover_model,
    group_summarize,
    instances_graph,
    load_folder,
    partition_by_correlation,
    refresh_timed_folder,
    save_folder,
)

TYPE_EQ = CorrelationCondition.attr_equality("type")


def names(folder):
    return sorted(m.id for m in folder.members)


def test_type_partition_on_fixture():
    folders = {f.name: f for f in partition_by_correlation(banking_graph(), TYPE_EQ)}
    assert set(folders) == {
        "type=artifact",
        "type=customer",
        "type=document",
        "type=manager",
        "type=staff",
        "type=work-item",
    }
    assert names(folders["type=artifact"]) == ["Home-Loan-Document", "report"]
    assert folders["type=artifact"].attributes["cardinality"] == "2"


def test_into_prefix():
    folders = partition_by_correlation(banking_graph(), TYPE_EQ, into="kinds")
    assert all(f.name.startswith("kinds.type=") for f in folders)


def test_missing_attribute_gives_no_folders():
    assert partition_by_correlation(banking_graph(), CorrelationCondition.attr_equality("order-id")) == []


def event_log(events=300, keys=12, seed=0):
    rows, _ = read_event_log(event_log_csv(events, keys, seed))
    g = build_graph([t for r in rows for t in event_row_triples(r)])
    return g, rows


def test_order_partition_matches_groupby():
    g, rows = event_log()
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("order-id"))
    expected = groupby_counts([r.extra for r in rows], "order-id")
    assert {f.name: len(f) for f in folders} == {f"order-id={k}": n for k, n in expected.items()}


def test_scope_restricts_entities():
    g = graph_union(banking_graph(), [triple("x", "@category", "home-loan"), triple("x", "@type", "offer")])
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("category", scope="artifact"))
    assert [names(f) for f in folders] == [["Home-Loan-Document", "report"]]


def test_cross_attribute_equality_needs_both_sides():
    g = build_graph(
        [
            triple("v1", "@author", "Ben"),
            triple("a1", "@who", "Ben"),
            triple("a2", "@who", "Tim"),
            triple("v2", "@author", "Eli"),
        ]
    )
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("author", "who"))
    assert sorted(names(f) for f in folders) == [["a1", "v1"], ["a2"], ["v2"]]


def test_path_condition_folder():
    catalog = Catalog()
    pc = PathCondition("Adam (edge node)* assigned-to STAFF")
    folder = apply_path_condition(banking_graph(), pc, "staff", catalog=catalog)
    assert names(folder) == ["Staff"]
    with pytest.raises(DuplicateName):
        apply_path_condition(banking_graph(), pc, "staff", catalog=catalog)
    none = apply_path_condition(banking_graph(), PathCondition("Manager edge node"), "empty")
    assert len(none) == 0


def test_path_condition_second_staff():
    g = graph_union(
        banking_graph(),
        [triple("Adam", "submitted", "form"), triple("form", "part-of", "item2"), triple("item2", "assigned-to", "Staff2")],
    )
    folder = apply_path_condition(g, PathCondition("Adam (edge node)* assigned-to node"), "staff")
    assert names(folder) == ["Staff", "Staff2"]


def events_graph(spec):
    out = []
    for eid, stamp, act, order in spec:
        out += [
            triple(eid, "@type", "event"),
            triple(eid, "@timestamp", stamp),
            triple(eid, "@activity", act),
            triple(eid, "@order-id", order),
            triple("Tim", "performed", eid),
        ]
    return build_graph(out)


def test_process_instance_ordering():
    g = events_graph([("e3", "3", "C", "o1"), ("e1", "1", "A", "o1"), ("e2", "2", "B", "o1")])
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("order-id"))
    (inst,) = build_process_instances(folders)
    assert inst.activities == ("A", "B", "C")
    assert [t.subject.id for t in inst.edges] == ["e1", "e2"]


def test_single_event_instance():
    g = events_graph([("e1", "1", "A", "o1")])
    (inst,) = build_process_instances(partition_by_correlation(g, CorrelationCondition.attr_equality("order-id")))
    assert len(inst) == 1


def test_two_orders_two_instances():
    g = events_graph([("e1", "1", "A", "o1"), ("e2", "2", "B", "o1"), ("e3", "1", "A", "o2"), ("e4", "3", "C", "o2")])
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("order-id"))
    assert [i.activities for i in build_process_instances(folders)] == [("A", "B"), ("A", "C")]
    ig = instances_graph(build_process_instances(folders), g)
    assert len(ig.partition("directly-followed-by")) == 2


def test_instances_require_events():
    folders = partition_by_correlation(banking_graph(), TYPE_EQ)
    with pytest.raises(NotAnEvent):
        build_process_instances(folders)


def test_dfg_examples():
    m = directly_follows([("A", "B", "C"), ("A", "C")])
    assert m.edges == {("A", "B"): 1, ("A", "C"): 1, ("B", "C"): 1}
    assert m.starts == {"A": 2} and m.ends == {"C": 2}
    m = directly_follows([("A",)])
    assert m.edges == {} and m.starts == m.ends == {"A": 1}
    assert directly_follows([("A", "B"), ("A", "B")]).edges == {("A", "B"): 2}
    assert "A -> B [label=2]" in directly_follows([("A", "B"), ("A", "B")]).edge_list()


def test_discover_model_dispatch():
    with pytest.raises(EmptyInput):
        discover_model([])
    with pytest.raises(UnknownAlgorithm):
        discover_model([("A",)], algo="alpha")
    model = discover_model([("A", "B")])
    assert model.algorithm == "dfg"


def test_group_by_activity():
    g, rows = event_log(200, 5)
    table = group_summarize(g, ["activity"], entity_type="event")
    assert {r[0]: int(r[1]) for r in table.rows} == dict(groupby_counts([{"a": r.activity} for r in rows], "a"))
    assert table.columns == ("activity", "count(*)")


def test_group_by_branch_on_fixture():
    table = group_summarize(banking_graph(), ["submission-branch"], entity_type="artifact")
    assert ("Sydney", "1") in table.rows
    assert ("Melbourne", "1") in table.rows


def test_group_by_bottom_bucket_and_measures():
    g = build_graph(
        [
            triple("a", "@type", "offer"),
            triple("a", "@days", "10"),
            triple("a", "@branch", "Sydney"),
            triple("b", "@type", "offer"),
            triple("b", "@days", "20"),
            triple("b", "@branch", "Sydney"),
            triple("c", "@type", "offer"),
            triple("c", "@days", "5"),
        ]
    )
    table = group_summarize(g, ["branch"], [("*", "count"), ("days", "sum"), ("days", "avg"), ("days", "min"), ("days", "max")], "offer")
    assert table.columns == ("branch", "count(*)", "sum(days)", "avg(days)", "min(days)", "max(days)")
    assert table.rows == (("Sydney", "2", "30", "15", "10", "20"), (BOTTOM, "1", "5", "5", "5", "5"))
    with pytest.raises(UnknownAggregate):
        group_summarize(g, ["branch"], [("days", "median")])
    with pytest.raises(UnknownAttribute):
        group_summarize(g, ["colour"], entity_type="offer")


def test_group_by_empty_folder():
    empty = FolderNode("empty", frozenset())
    assert len(group_summarize(empty, ["activity"])) == 0


def test_timed_refresh_examples():
    g = banking_graph()
    (artifacts,) = [f for f in partition_by_correlation(g, TYPE_EQ, timed=True, snapshot_id=1) if f.name == "type=artifact"]
    same = refresh_timed_folder(artifacts, g, 2)
    assert same.members == artifacts.members and same.log == artifacts.log

    added = refresh_timed_folder(artifacts, graph_union(g, [triple("contract", "@type", "artifact")]), 2)
    assert [e.id.id for e in added.log if e.added_at == 2] == ["contract"]

    removed = refresh_timed_folder(artifacts, graph_difference(g, [triple("report", "@type", "artifact")]), 3)
    entry = next(e for e in removed.log if e.id.id == "report")
    assert entry.removed_at == 3
    assert uri("report") not in removed.members


def test_refresh_needs_definition():
    with pytest.raises(NoDefiningQuery):
        refresh_timed_folder(FolderNode("x", frozenset()), banking_graph(), 1)


def test_registered_predicate_and_unknown_name():
    reg = AlgorithmRegistry()
    reg.register("close", "correlation_predicate", lambda g, x, y: abs(int(g.attribute(x, "n")) - int(g.attribute(y, "n"))) <= 1)
    g = build_graph([triple(f"e{i}", "@n", str(v)) for i, v in enumerate([1, 2, 3, 7, 8, 20])])
    folders = partition_by_correlation(g, CorrelationCondition.registered("close"), registry=reg)
    assert sorted(names(f) for f in folders) == [["e0", "e1", "e2"], ["e3", "e4"], ["e5"]]
    with pytest.raises(UnknownRegisteredCondition):
        partition_by_correlation(g, CorrelationCondition.registered("nope"), registry=reg)


def test_save_and_load_folder(tmp_path):
    g = banking_graph()
    folders = partition_by_correlation(g, TYPE_EQ, timed=True, snapshot_id=4)
    for f in folders:
        loaded = load_folder(save_folder(f, tmp_path), g)
        assert loaded == f
    pc_folder = apply_path_condition(g, PathCondition("Adam (edge node)* assigned-to STAFF", start="Adam"), "staff")
    assert load_folder(save_folder(pc_folder, tmp_path), g) == pc_folder


# -- properties ---------------------------------------------------------------

values = st.sampled_from(["k1", "k2", "k3", "k4"])


@st.composite
def keyed_entities(draw):
    out = []
    for i in range(draw(st.integers(0, 25))):
        for attr in ("a", "b"):
            for v in draw(st.lists(values, max_size=2, unique=True)):
                out.append(triple(f"e{i:02d}", "@" + attr, v))
        out.append(triple(f"e{i:02d}", "@type", "thing"))
    return build_graph(out)


def components(nodes, linked):
    """Reference components by repeated BFS over an explicit pair predicate."""
    seen, out = set(), []
    for n in nodes:
        if n in seen:
            continue
        comp, stack = set(), [n]
        while stack:
            x = stack.pop()
            if x in comp:
                continue
            comp.add(x)
            stack.extend(y for y in nodes if y not in comp and (linked(x, y) or linked(y, x)))
        seen |= comp
        out.append(sorted(comp))
    return sorted(out)


@settings(max_examples=150, deadline=None)
@given(keyed_entities())
def test_partition_laws_single_attribute(g):
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("a"))
    carriers = {n for n in g.nodes if g.attributes(n).get("a")}
    seen = set()
    for f in folders:
        assert not (f.members & seen)
        seen |= f.members
    assert seen == carriers


@settings(max_examples=150, deadline=None)
@given(keyed_entities())
def test_psi_consistency_against_component_oracle(g):
    def psi(x, y):
        return bool(set(g.attributes(x).get("a", ())) & set(g.attributes(y).get("b", ())))

    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("a", "b"))
    carriers = sorted(n for n in g.nodes if g.attributes(n).get("a") or g.attributes(n).get("b"))
    assert sorted(sorted(f.members) for f in folders) == components(carriers, psi)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.sampled_from("ABCDE"), min_size=1, max_size=6), min_size=1, max_size=10))
def test_dfg_conservation_and_counts(seqs):
    model = directly_follows([tuple(s) for s in seqs])
    edges, starts, ends = dfg_counts(seqs)
    assert model.edges == dict(edges) and model.starts == dict(starts) and model.ends == dict(ends)
    for a in model.activities:
        out_flow = sum(n for (x, _), n in model.edges.items() if x == a) + model.ends.get(a, 0)
        in_flow = sum(n for (_, y), n in model.edges.items() if y == a) + model.starts.get(a, 0)
        assert out_flow == in_flow


@settings(max_examples=100, deadline=None)
@given(keyed_entities())
def test_group_count_totals_cardinality(g):
    for folder in partition_by_correlation(g, CorrelationCondition.attr_equality("a")):
        table = group_summarize(folder, ["b"]) if any(folder.subgraph.attribute(m, "b") for m in folder.members) else None
        if table is not None:
            assert sum(int(r[-1]) for r in table.rows) == len(folder)


@settings(max_examples=80, deadline=None)
@given(keyed_entities())
def test_refresh_idempotent(g):
    for folder in partition_by_correlation(g, CorrelationCondition.attr_equality("a"), timed=True, snapshot_id=1):
        once = refresh_timed_folder(folder, g, 2)
        twice = refresh_timed_folder(once, g, 3)
        assert once.members == folder.members == twice.members
        assert once.log == folder.log == twice.log


@pytest.mark.parametrize("seed", range(5))
def test_instances_follow_timestamps(seed):
    g, rows = event_log(400, 8, seed)
    folders = partition_by_correlation(g, CorrelationCondition.attr_equality("order-id"))
    by_key = {}
    for r in sorted(rows, key=lambda r: (r.timestamp, r.event_id)):
        by_key.setdefault(r.extra["order-id"], []).append(r.activity)
    instances = build_process_instances(folders)
    assert sorted(i.activities for i in instances) == sorted(tuple(v) for v in by_key.values())
    model = discover_model(instances)
    assert sum(model.starts.values()) == len(instances)
    assert Counter(a for i in instances for a in i.activities) == Counter(r.activity for r in rows)
