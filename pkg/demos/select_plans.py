"""How a select query becomes a star/chain join plan, and what parallelism changes."""

import time

from procgraph.datasets import VENDOR_QUERY, vendor_triples
from procgraph.graph import build_graph
from procgraph.lang import parse
from procgraph.plan import execute, explain, plan_query

g = build_graph(vendor_triples(2000, 3, 2))
query = parse(VENDOR_QUERY)
print(query.to_text() if hasattr(query, "to_text") else VENDOR_QUERY)

# One star join per subject variable, chain joins on the shared variables,
# the smallest estimated input joined first.
plan = plan_query(query, g)
print("\n" + explain(plan))

# Pushdown moves filters that touch a single star into that star.
print("\nwith pushdown:\n" + explain(plan_query(query, g, pushdown=True)))

for p in (1, 4):
    started = time.perf_counter()
    table = execute(plan, g, parallelism=p)
    print(f"\nparallelism {p}: {len(table.rows)} rows in {time.perf_counter() - started:.2f}s")
    for kind, size in table.stats["stages"]:
        print(f"  {kind:9} {size}")
