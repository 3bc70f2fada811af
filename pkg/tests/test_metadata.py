import itertools
import random

import pytest

from procgraph.datasets import evolution_graph, evolution_triples
from procgraph.errors import NotAVersion, UnknownEntity, UnknownFilterKey, UnknownNode
from procgraph.graph import build_graph, triple, uri
from procgraph.metadata import (
    InstantRange,
    derivation_of,
    evolution_of,
    get_version,
    parents,
    timeseries_of,
)

V1, V2 = "Adam_loan_document_v1", "Adam_loan_document_v2"


def path_ids(result):
    return list(result.path_ids)


def test_evolution_unfiltered():
    result = evolution_of(evolution_graph(), V2)
    assert path_ids(result) == ["path#1", "path#2", "path#3"]
    for p in result.paths:
        assert p.start == uri(V1) and p.end == uri(V2)
    assert len(result.path_node) == 3


def test_evolution_filtered_to_two():
    result = evolution_of(evolution_graph(), V2, {"what": "lifecycle", "how": "create"})
    assert path_ids(result) == ["path#1", "path#2"]
    assert [n.id for n in result.path_ids["path#1"].nodes] == [V1, "act1", V2]


def test_evolution_of_root_version():
    assert evolution_of(evolution_graph(), V1).paths == ()


def test_evolution_errors():
    with pytest.raises(NotAVersion):
        evolution_of(evolution_graph(), "act1")
    with pytest.raises(UnknownNode):
        evolution_of(evolution_graph(), "missing")
    with pytest.raises(UnknownFilterKey):
        evolution_of(evolution_graph(), V2, {"colour": "red"})


def test_render_lists_path_ids():
    text = evolution_of(evolution_graph(), V2, {"what": "lifecycle", "how": "create"}).render()
    assert text.splitlines()[0] == f"evolutionOf({V2}):"
    assert [line.split(":")[0].strip() for line in text.splitlines()[1:]] == ["path#1", "path#2"]


def test_derivation_examples():
    g = evolution_graph()
    assert derivation_of(g, V2).ancestors == (uri(V1),)
    assert derivation_of(g, V1).ancestors == ()
    assert get_version(g, V2).parents == (uri(V1),)


def diamond():
    out = []
    for v in ("v1", "v2", "v3", "v4"):
        out.append(triple(v, "@type", "version"))
    out += [triple("v1", "next-version", "v2"), triple("v1", "next-version", "v3")]
    out += [triple("v4", "@parent", "v2"), triple("v4", "@parent", "v3")]
    return build_graph(out)


def test_diamond_derivation():
    anc = derivation_of(diamond(), "v4").ancestors
    assert set(anc) == {uri("v1"), uri("v2"), uri("v3")}
    assert anc[0] == uri("v1")


def random_version_dag(rng):
    n = rng.randint(1, 12)
    out = [triple(f"v{i:02d}", "@type", "version") for i in range(n)]
    for j in range(1, n):
        for i in rng.sample(range(j), k=min(j, rng.randint(0, 2))):
            if rng.random() < 0.5:
                out.append(triple(f"v{i:02d}", "next-version", f"v{j:02d}"))
            else:
                out.append(triple(f"v{j:02d}", "@parent", f"v{i:02d}"))
    return build_graph(out), n


@pytest.mark.parametrize("seed", range(30))
def test_derivation_closure_properties(seed):
    g, n = random_version_dag(random.Random(seed))
    for i in range(n):
        v = uri(f"v{i:02d}")
        anc = derivation_of(g, v).ancestors
        assert set(parents(g, v)) <= set(anc)
        pos = {a: k for k, a in enumerate(anc)}
        for a in anc:
            assert set(derivation_of(g, a).ancestors) <= set(anc) | {a}
            for p in parents(g, a):
                assert pos[p] < pos[a]


def test_filter_monotonicity():
    g = evolution_graph()
    options = {
        "what": ["lifecycle", "archiving"],
        "how": ["create", "use"],
        "who": ["Tim", "Ben"],
        "where": ["Sydney"],
        "when": [InstantRange(low="2017-12-03T00:00:00Z")],
    }
    keys = list(options)
    for r in range(len(keys)):
        for chosen in itertools.combinations(keys, r):
            base = {k: options[k][0] for k in chosen}
            before = set(evolution_of(g, V2, base).path_ids)
            for extra in keys:
                if extra in chosen:
                    continue
                for value in options[extra]:
                    after = set(evolution_of(g, V2, dict(base, **{extra: value})).path_ids)
                    assert after <= before


def test_evolution_endpoints_and_origins():
    g = evolution_graph()
    result = evolution_of(g, V2)
    origins = set(derivation_of(g, V2).ancestors) | {uri(V2)}
    for p in result.paths:
        assert p.end == uri(V2)
        assert p.start in origins


def versions_graph(stamps):
    out = [triple("doc", "@type", "artifact")]
    for i, stamp in enumerate(stamps):
        v = f"doc_v{i}"
        out += [triple(v, "@type", "version"), triple(v, "@version-of", "doc"), triple(v, "@created-at", stamp)]
    return build_graph(out)


def test_timeseries_versions_in_order():
    g = versions_graph(["2017-12-03", "2017-12-01", "2017-12-02"])
    series = timeseries_of(g, "doc").series
    assert [e.node.id for e in series] == ["doc_v1", "doc_v2", "doc_v0"]


def test_timeseries_empty_range():
    g = versions_graph(["2017-12-03", "2017-12-01"])
    result = timeseries_of(g, "doc", {"when": InstantRange(low="2030-01-01")})
    assert result.series == ()


def test_timeseries_of_actor():
    g = evolution_graph()
    series = timeseries_of(g, "Ben").series
    assert [e.node.id for e in series] == ["act3", "act5"]
    stamps = [e.stamp for e in series]
    assert stamps == sorted(stamps)
    assert [e.node.id for e in timeseries_of(g, "Tim").series] == ["act1"]
    assert timeseries_of(g, "Tim", {"why": "fraud"}).series == ()


def test_timeseries_unknown_entity():
    with pytest.raises(UnknownEntity):
        timeseries_of(evolution_graph(), "Nobody")


def test_instant_range():
    r = InstantRange.from_comparison(">=", "2017-12-01").intersect(InstantRange.from_comparison("<", "2017-12-02"))
    assert r.contains("2017-12-01T00:00:00Z")
    assert r.contains("2017-12-01T23:59:59.999Z")
    assert not r.contains("2017-12-02")
    assert not r.contains("not a time")
    with pytest.raises(ValueError):
        InstantRange.from_comparison(">", "tomorrow")


def test_fixture_has_three_chains():
    acts = [t for t in evolution_triples() if t.predicate.id == "activity"]
    assert len(acts) == 2 + 3 + 3
