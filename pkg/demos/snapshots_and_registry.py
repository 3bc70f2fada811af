"""Snapshots, timed folders and pluggable correlation predicates, driven through a session."""

import io

from procgraph.cli import Session
from procgraph.datasets import banking_graph
from procgraph.graph import triple
from procgraph.registry import CORRELATION_PREDICATE, AlgorithmRegistry, SnapshotCatalog


def same_category(g, x, y):
    a = g.attribute(x, "category")
    return a is not None and a == g.attribute(y, "category")


registry = AlgorithmRegistry()
registry.register("same-category", CORRELATION_PREDICATE, same_category)

catalog = SnapshotCatalog(banking_graph())
out = io.StringIO()
session = Session(catalog, 1, registry=registry, out=out)

print(session.evaluate("correlation x.type = y.type into kinds timed"), end="")
print(session.evaluate("correlation same-category"), end="")

# Commit a new snapshot: a second artifact arrives. Folders keep their old
# membership until they are refreshed against the new snapshot.
sid = catalog.commit_snapshot([triple("Loan-Contract", "@type", "artifact"), triple("Manager", "signed", "Loan-Contract")])
print("committed snapshot", sid)
print(session.evaluate("\\folders"), end="")

session.snapshot_id = sid
print(session.evaluate("correlation x.type = y.type into kinds timed"), end="")
for entry in catalog.catalog.folders["kinds.type=artifact"].log:
    print(f"  {entry.id.id} added at {entry.added_at}, removed at {entry.removed_at}")

# Snapshot 1 is untouched by the commit.
print(Session(catalog, 1).evaluate("entity artifact"), end="")
print(Session(catalog, sid).evaluate("entity artifact"), end="")
