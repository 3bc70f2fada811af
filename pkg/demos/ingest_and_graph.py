"""Loading a process graph from a triple file and from a CSV event log."""

import tempfile
from pathlib import Path

from procgraph.datasets import banking_triples, event_log_csv
from procgraph.graph import dump_triples, uri
from procgraph.ingest import emit_time_order_edges, load_event_log, load_triple_file

work = Path(tempfile.mkdtemp())

# A triple file is one `subject<TAB>predicate<TAB>object` per line.
# Predicates starting with @ are attributes and carry literal values.
(work / "bank.tsv").write_text(dump_triples(banking_triples()) + "broken line without tabs\n")
g, report = load_triple_file(work / "bank.tsv")
print("banking graph:", len(g.nodes), "nodes,", len(g.triples), "triples")
print(report.summary())

print("\nentities typed 'artifact':", [n.id for n in g.entities("artifact")])
print("attributes of Home-Loan-Document:", g.attributes(uri("Home-Loan-Document")))
print("Adam's outgoing edges:", [(p.id, o.id) for p, o in g.out_edges(uri("Adam"))])

# Event logs: each row becomes an event node, with `actor performed event`
# and one attribute per extra column.
(work / "log.csv").write_text(event_log_csv(12, keys=3, seed=1))
events, report = load_event_log(work / "log.csv")
print("\nevent log:", report.summary())

# Chronological order is opt-in: happened-before links each event to the next one in time.
ordered = emit_time_order_edges(events)
chain = sorted((t.subject.id, t.object.id) for t in ordered.triples if t.predicate.id == "happened-before")
print("first happened-before edges:", chain[:4])
