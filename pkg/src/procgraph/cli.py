"""Command-line batch runner and interactive shell."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from .errors import IoError, ProcGraphError, QuerySyntaxError
from .graph import ErGraph, build_graph, dump_triples
from .ingest import emit_time_order_edges, load_event_log, load_triple_file
from .lang.ast import CorrelationStmt, EntityStmt, MetadataStmt, RelationshipStmt, SelectStmt
from .lang.parser import line_col, parse, split_statements
from .lang.translate import translate_entity, translate_metadata
from .paths import DEFAULT_MAX_HOPS, PathNodeSpec, find_paths, format_path, materialize_path_node, paths_to_json
from .plan import execute, explain, plan_query
from .registry import AlgorithmRegistry, SnapshotCatalog
from .summarize import (
    PathCondition,
    apply_path_condition,
    load_folder,
    partition_by_correlation,
    refresh_timed_folder,
    save_folder,
)

EXIT_OK, EXIT_QUERY_ERROR, EXIT_USAGE = 0, 1, 2
FORMATS = ("tsv", "json")


class UsageError(Exception):
    pass


@dataclass
class Session:
    """State shared by batch runs and the shell."""

    snapshots: SnapshotCatalog
    snapshot_id: int
    fmt: str = "tsv"
    parallelism: int = 1
    allow_cycles: bool = False
    allow_product: bool = False
    timeout: float | None = None
    catalog_dir: Path | None = None
    registry: AlgorithmRegistry | None = None  # None means the process-wide default
    out: TextIO = field(default_factory=lambda: sys.stdout)
    err: TextIO = field(default_factory=lambda: sys.stderr)

    @property
    def graph(self) -> ErGraph:
        return self.snapshots.graph(self.snapshot_id)

    @property
    def catalog(self):
        return self.snapshots.catalog

    @property
    def max_hops(self) -> int | None:
        return DEFAULT_MAX_HOPS if self.allow_cycles else None

    # -- statements ---------------------------------------------------------

    def evaluate(self, text: str) -> str:
        """Run one statement or shell command and return its output text."""
        stripped = text.strip()
        if stripped.startswith("\\"):
            return self.command(stripped)
        stmt = parse(text)
        return self.run_statement(stmt)

    def run_statement(self, stmt) -> str:
        g = self.graph
        if isinstance(stmt, (EntityStmt, SelectStmt)):
            select = translate_entity(stmt) if isinstance(stmt, EntityStmt) else stmt
            plan = plan_query(select, g, allow_product=self.allow_product)
            return execute(plan, g, parallelism=self.parallelism, timeout=self.timeout).render(self.fmt)
        if isinstance(stmt, CorrelationStmt):
            return self._correlation(stmt, g)
        if isinstance(stmt, RelationshipStmt):
            return self._relationship(stmt, g)
        if isinstance(stmt, MetadataStmt):
            result = translate_metadata(stmt).run(g)
            return result.to_json() + "\n" if self.fmt == "json" else result.render()
        raise TypeError(f"unsupported statement {stmt!r}")

    def _correlation(self, stmt: CorrelationStmt, g: ErGraph) -> str:
        folders = partition_by_correlation(g, stmt.condition, stmt.into, stmt.timed, self.snapshot_id, self.registry)
        stored = []
        for folder in folders:
            old = self.catalog.folders.get(folder.name)
            if old is not None and old.timed and stmt.timed:
                folder = refresh_timed_folder(old, g, self.snapshot_id, self.registry)
                self.catalog.put_folder(folder, replace=True)
            else:
                self.catalog.put_folder(folder)
            stored.append(folder)
        self._persist(stored)
        return self._folder_listing(stored)

    def _relationship(self, stmt: RelationshipStmt, g: ErGraph) -> str:
        if stmt.into_folder:
            old = self.catalog.folders.get(stmt.into)
            if old is not None and old.timed and stmt.timed:
                folder = refresh_timed_folder(old, g, self.snapshot_id, max_hops=self.max_hops)
                self.catalog.put_folder(folder, replace=True)
            else:
                folder = apply_path_condition(
                    g, PathCondition(stmt.regex), stmt.into, self.catalog, stmt.timed, self.snapshot_id, self.max_hops
                )
            self._persist([folder])
            if self.fmt == "json":
                return json.dumps({"folder": folder.name, "members": [m.id for m in folder.sorted_members()]}) + "\n"
            return "".join(m.id + "\n" for m in folder.sorted_members())
        if stmt.into:
            spec = PathNodeSpec(stmt.into, stmt.regex, timed=stmt.timed)
            node = materialize_path_node(self.catalog, spec, g, self.snapshot_id, self.max_hops)
            if self.fmt == "json":
                return json.dumps({"name": node.name, "paths": {k: p.to_json() for k, p in node.ids.items()}}) + "\n"
            return node.render() + "\n"
        paths = find_paths(g, stmt.regex, max_hops=self.max_hops)
        if self.fmt == "json":
            return paths_to_json(paths) + "\n"
        return "".join(format_path(p) + "\n" for p in paths)

    def _folder_listing(self, folders) -> str:
        if self.fmt == "json":
            return json.dumps([{"folder": f.name, "size": len(f)} for f in folders]) + "\n"
        return "folder\tsize\n" + "".join(f.render() + "\n" for f in folders)

    def _persist(self, folders) -> None:
        if self.catalog_dir is not None:
            for f in folders:
                save_folder(f, self.catalog_dir / "folders")

    # -- shell commands -----------------------------------------------------

    def command(self, text: str) -> str:
        name, _, arg = text[1:].partition(" ")
        arg = arg.strip()
        name = name.lower()
        if name == "quit":
            raise SystemExit(EXIT_OK)
        if name == "format":
            if arg not in FORMATS:
                raise UsageError(f"\\format expects one of {', '.join(FORMATS)}")
            self.fmt = arg
            return ""
        if name == "folders":
            folders = [self.catalog.folders[k] for k in sorted(self.catalog.folders)]
            return self._folder_listing(folders)
        if name == "paths":
            if arg:
                node = self.catalog.path_nodes.get(arg)
                if node is None:
                    raise UsageError(f"no path node named {arg!r}")
                return node.render() + "\n"
            names = sorted(self.catalog.path_nodes)
            return "".join(f"{n}\t{len(self.catalog.path_nodes[n])}\n" for n in names)
        if name == "explain":
            if not arg:
                raise UsageError("\\explain needs a statement")
            stmt = parse(arg)
            if isinstance(stmt, EntityStmt):
                stmt = translate_entity(stmt)
            if not isinstance(stmt, SelectStmt):
                raise UsageError("\\explain applies to select and entity statements")
            return explain(plan_query(stmt, self.graph, allow_product=self.allow_product))
        if name == "load":
            if not arg:
                raise UsageError("\\load needs a file")
            g = _load_source(arg, None, self.allow_cycles)
            self.snapshot_id = _commit_replacing(self.snapshots, g)
            self._save_snapshots()
            return f"snapshot {self.snapshot_id}: {len(g.triples)} triples\n"
        if name == "snapshot":
            if arg:
                sid = int(arg)
                self.snapshots.graph(sid)  # raises UnknownSnapshot before switching
                self.snapshot_id = sid
            return f"snapshot {self.snapshot_id}\n"
        raise UsageError(f"unknown command \\{name}")

    def _save_snapshots(self) -> None:
        if self.catalog_dir is not None:
            self.snapshots.save(self.catalog_dir)


def _commit_replacing(snapshots: SnapshotCatalog, g: ErGraph) -> int:
    current = snapshots.graph(snapshots.latest).triples
    if current == g.triples:
        return snapshots.latest
    return snapshots.commit_snapshot(g.triples - current, current - g.triples)


def _load_source(path: str, mapping: str | None, allow_cycles: bool) -> ErGraph:
    if path.lower().endswith(".csv"):
        return load_event_log(path, mapping)[0]
    return load_triple_file(path, allow_cycles=allow_cycles)[0]


def _render_error(exc: Exception, text: str, offset: int) -> str:
    base_line, base_col = line_col(text, offset)
    if isinstance(exc, QuerySyntaxError):
        line = base_line + exc.line - 1
        col = exc.column + (base_col - 1 if exc.line == 1 else 0)
        detail = exc.message
        if exc.expected:
            detail += " (expected " + ", ".join(sorted(exc.expected)) + ")"
        return f"{line}:{col}: syntax error: {detail}"
    chunk = text[offset:]
    lead = len(chunk) - len(chunk.lstrip())
    line, col = line_col(text, offset + lead)
    return f"{line}:{col}: {type(exc).__name__}: {exc}"


def run_batch(text: str, session: Session) -> int:
    """Execute every statement in order; returns 1 when any statement failed."""
    status = EXIT_OK
    for offset, chunk in split_statements(text):
        try:
            session.out.write(session.evaluate(chunk))
        except (ProcGraphError, UsageError, ValueError) as exc:
            session.err.write(_render_error(exc, text, offset) + "\n")
            status = EXIT_QUERY_ERROR
    session.out.flush()
    return status


def repl(session: Session, stdin: TextIO | None = None) -> int:
    """Read statements and commands until ``\\quit`` or end of input."""
    stdin = stdin or sys.stdin
    interactive = stdin.isatty()
    history = None
    if interactive:
        try:
            import readline

            history = Path(os.path.expanduser("~/.procgraph_history"))
            if history.exists():
                readline.read_history_file(history)
        except (ImportError, OSError):
            history = None
    buffer: list[str] = []
    try:
        while True:
            if interactive:
                prompt = "...> " if buffer else "procgraph> "
                try:
                    line = input(prompt)
                except EOFError:
                    break
            else:
                line = stdin.readline()
                if not line:
                    break
                line = line.rstrip("\n")
            if not buffer and line.strip().startswith("\\"):
                try:
                    session.out.write(session.evaluate(line))
                except (ProcGraphError, UsageError, ValueError) as exc:
                    session.err.write(f"error: {exc}\n")
                session.out.flush()
                continue
            if not buffer and not line.strip():
                continue
            buffer.append(line)
            text = "\n".join(buffer)
            done = not line.strip() or text.rstrip().endswith(";")
            if not done:
                try:
                    parse(text)
                    done = True
                except QuerySyntaxError as exc:
                    done = not exc.at_end
            if not done:
                continue
            buffer = []
            for offset, chunk in split_statements(text):
                try:
                    session.out.write(session.evaluate(chunk))
                except (ProcGraphError, UsageError, ValueError) as exc:
                    session.err.write(_render_error(exc, text, offset) + "\n")
            session.out.flush()
    except SystemExit:
        pass
    finally:
        if history is not None:
            try:
                import readline

                readline.write_history_file(history)
            except OSError:
                pass
    if buffer:
        text = "\n".join(buffer)
        try:
            session.out.write(session.evaluate(text))
        except (ProcGraphError, UsageError, ValueError) as exc:
            session.err.write(_render_error(exc, text, 0) + "\n")
    session.out.flush()
    return EXIT_OK


# -- argument handling ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procgraph", description="Query entity-relationship process graphs.")
    parser.add_argument("--graph", help="tab-separated triple file")
    parser.add_argument("--log", help="CSV event log")
    parser.add_argument("--map", dest="mapping", help="column mapping config for --log")
    parser.add_argument("--format", choices=FORMATS, default="tsv")
    parser.add_argument("--parallelism", type=int, default=1)
    parser.add_argument("--allow-cycles", action="store_true")
    parser.add_argument("--allow-product", action="store_true")
    parser.add_argument("--timeout", type=float, default=None, help="seconds per statement")
    parser.add_argument("--catalog", default=os.environ.get("PROCGRAPH_CATALOG"), help="catalog directory")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="load a source and print normalized triples")
    isub = ingest.add_subparsers(dest="source", required=True)
    t = isub.add_parser("triples")
    t.add_argument("file")
    t.add_argument("--out")
    lg = isub.add_parser("log")
    lg.add_argument("file")
    lg.add_argument("--map", dest="log_map")
    lg.add_argument("--time-order", action="store_true", help="add happened-before edges between events")
    lg.add_argument("--out")

    snap = sub.add_parser("snapshot", help="list or commit snapshots in the catalog")
    ssub = snap.add_subparsers(dest="action", required=True)
    ssub.add_parser("list")
    commit = ssub.add_parser("commit")
    commit.add_argument("--add")
    commit.add_argument("--remove")

    query = sub.add_parser("query", help="run a statement file ('-' for stdin)")
    query.add_argument("file")
    query.add_argument("--snapshot", type=int)

    sub.add_parser("repl", help="interactive shell")
    return parser


def _open_catalog(args) -> tuple[SnapshotCatalog, Path | None]:
    catalog_dir = Path(args.catalog) if args.catalog else None
    existing = catalog_dir is not None and (catalog_dir / "catalog.json").exists()
    sources = []
    if args.graph:
        sources.append(_load_source(args.graph, None, args.allow_cycles))
    if args.log:
        sources.append(load_event_log(args.log, args.mapping)[0])
    g = build_graph(frozenset().union(*(s.triples for s in sources)), allow_cycles=args.allow_cycles) if sources else None
    if existing:
        snapshots = SnapshotCatalog.load(catalog_dir)
        folder_dir = catalog_dir / "folders"
        for manifest in sorted(folder_dir.glob("*.json")) if folder_dir.is_dir() else ():
            f = load_folder(manifest)
            if f.snapshot_id in snapshots:
                f = load_folder(manifest, snapshots.graph(f.snapshot_id))
            snapshots.catalog.put_folder(f, replace=True)
        if g is not None:
            _commit_replacing(snapshots, g)
    else:
        snapshots = SnapshotCatalog(g if g is not None else build_graph(()), allow_cycles=args.allow_cycles)
    if catalog_dir is not None:
        snapshots.save(catalog_dir)
    return snapshots, catalog_dir


def _session(args, snapshots: SnapshotCatalog, catalog_dir: Path | None) -> Session:
    if args.parallelism < 1:
        raise UsageError("--parallelism must be at least 1")
    return Session(
        snapshots,
        snapshots.latest,
        fmt=args.format,
        parallelism=args.parallelism,
        allow_cycles=args.allow_cycles,
        allow_product=args.allow_product,
        timeout=args.timeout,
        catalog_dir=catalog_dir,
    )


def _read_delta(path: str | None) -> frozenset:
    if not path:
        return frozenset()
    g, _ = load_triple_file(path, allow_cycles=True)
    return g.triples


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "ingest":
            if args.source == "triples":
                g, report = load_triple_file(args.file, allow_cycles=args.allow_cycles)
            else:
                mapping = args.log_map or args.mapping
                g, report = load_event_log(args.file, mapping)
                if args.time_order:
                    g = emit_time_order_edges(g)
            sys.stderr.write(report.summary() + "\n")
            text = dump_triples(g.triples)
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
            if args.catalog:
                args.graph = args.log = None
                snapshots, catalog_dir = _open_catalog(args)
                _commit_replacing(snapshots, build_graph(snapshots.graph().triples | g.triples, allow_cycles=args.allow_cycles))
                snapshots.save(catalog_dir)
            return EXIT_OK
        snapshots, catalog_dir = _open_catalog(args)
        if args.command == "snapshot":
            if catalog_dir is None:
                raise UsageError("snapshot commands need --catalog or PROCGRAPH_CATALOG")
            if args.action == "commit":
                sid = snapshots.commit_snapshot(_read_delta(args.add), _read_delta(args.remove))
                snapshots.save(catalog_dir)
                sys.stdout.write(f"{sid}\n")
            else:
                sys.stdout.write("".join(info.render() + "\n" for info in snapshots.list()))
            return EXIT_OK
        session = _session(args, snapshots, catalog_dir)
        if args.command == "query":
            if args.snapshot is not None:
                snapshots.graph(args.snapshot)
                session.snapshot_id = args.snapshot
            if args.file == "-":
                text = sys.stdin.read()
            else:
                try:
                    text = Path(args.file).read_text(encoding="utf-8")
                except OSError as exc:
                    raise UsageError(f"cannot read {args.file}: {exc}") from exc
            return run_batch(text, session)
        return repl(session)
    except (UsageError, IoError, ValueError) as exc:
        sys.stderr.write(f"procgraph: {exc}\n")
        return EXIT_USAGE
    except ProcGraphError as exc:
        sys.stderr.write(f"procgraph: {type(exc).__name__}: {exc}\n")
        return EXIT_QUERY_ERROR


if __name__ == "__main__":
    sys.exit(main())
