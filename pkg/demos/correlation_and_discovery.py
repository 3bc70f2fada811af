"""Grouping events into process instances and discovering a directly-follows graph."""

from procgraph.datasets import event_log_csv
from procgraph.graph import build_graph
from procgraph.ingest import event_row_triples, read_event_log
from procgraph.summarize import (
    CorrelationCondition,
    build_process_instances,
    discover_model,
    group_summarize,
    partition_by_correlation,
)

rows, _ = read_event_log(event_log_csv(60, keys=5, seed=3, activities="ABC"))
g = build_graph([t for r in rows for t in event_row_triples(r)])

# Events sharing an order-id end up in the same folder.
folders = partition_by_correlation(g, CorrelationCondition.attr_equality("order-id"), into="orders")
for f in folders:
    print(f"{f.name:24} {len(f):3} events")

# Each folder, ordered by timestamp, is one process instance.
instances = build_process_instances(folders)
for inst in instances[:3]:
    print(inst.key, "".join(inst.activities))

model = discover_model(instances)
print("\ndirectly-follows counts:")
for (a, b), n in sorted(model.edges.items()):
    print(f"  {a} -> {b}: {n}")
print("starts:", model.starts, "ends:", model.ends)

# Group-by over one folder: how much each activity contributes by amount.
table = group_summarize(folders[0], ["activity"], [("*", "count"), ("amount", "sum")])
print("\n" + table.to_tsv(), end="")
