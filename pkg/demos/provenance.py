"""Provenance questions over a versioned loan document."""

from procgraph.datasets import evolution_graph
from procgraph.metadata import InstantRange, derivation_of, evolution_of, timeseries_of

g = evolution_graph()
v2 = "Adam_loan_document_v2"

print(evolution_of(g, v2).render())

# Tim only cares about lifecycle activities that created something.
print(evolution_of(g, v2, {"what": "lifecycle", "how": "create"}).render())

print("v2 derives from:", [n.id for n in derivation_of(g, v2).ancestors])

print("\nBen's activities over time:")
for entry in timeseries_of(g, "Ben").series:
    print(" ", entry.stamp, entry.node.id)

december = InstantRange.from_comparison(">=", "2017-12-03")
print("from Dec 3 on:", [e.node.id for e in timeseries_of(g, "Ben", {"when": december}).series])
