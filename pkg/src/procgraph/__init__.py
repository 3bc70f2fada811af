"""Process-graph query engine: entity-relationship graphs, path queries, folders and select plans."""

from .errors import ProcGraphError
from .graph import ErGraph, Node, Triple, build_graph, triple
from .ingest import load_event_log, load_triple_file
from .lang import format_statement, parse, translate_entity, translate_metadata
from .metadata import derivation_of, evolution_of, timeseries_of
from .paths import Path, compile_regex, find_paths, is_reachable
from .plan import build_algebra, compile_plan, execute, explain
from .registry import AlgorithmRegistry, SnapshotCatalog, default_registry
from .summarize import (
    CorrelationCondition,
    build_process_instances,
    discover_model,
    group_summarize,
    partition_by_correlation,
)

__all__ = [
    "AlgorithmRegistry",
    "CorrelationCondition",
    "ErGraph",
    "Node",
    "Path",
    "ProcGraphError",
    "SnapshotCatalog",
    "Triple",
    "build_algebra",
    "build_graph",
    "build_process_instances",
    "compile_plan",
    "compile_regex",
    "default_registry",
    "derivation_of",
    "discover_model",
    "evolution_of",
    "execute",
    "explain",
    "find_paths",
    "format_statement",
    "group_summarize",
    "is_reachable",
    "load_event_log",
    "load_triple_file",
    "parse",
    "partition_by_correlation",
    "timeseries_of",
    "translate_entity",
    "translate_metadata",
    "triple",
]
