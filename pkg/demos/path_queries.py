"""Regular path queries over the loan-approval graph."""

from procgraph.datasets import banking_graph
from procgraph.paths import PathNodeSpec, find_paths, format_path, is_reachable, materialize_path_node
from procgraph.registry import Catalog

g = banking_graph()

# `node` and `edge` are wildcards; other words name a node id, an edge label,
# or (failing that) a type, compared case-insensitively.
for regex in [
    "Adam (edge node)* assigned-to Staff",
    "Adam (edge node)+ approved-by Manager",
    "Adam (edge node)* edge Artifact",
]:
    print(regex)
    for p in find_paths(g, regex):
        print("   ", format_path(p))

print("\nManager reachable from Adam:", is_reachable(g, "Adam", "Manager"))
print("Adam reachable from Manager:", is_reachable(g, "Manager", "Adam"))

# A path node stores the matching paths under a name so later queries can reuse them.
catalog = Catalog()
node = materialize_path_node(catalog, PathNodeSpec("adam-artifacts", "Adam (edge node)* edge @type=artifact"), g)
print()
print(node.render())
