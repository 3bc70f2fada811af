"""Algebra trees, logical plans and the partition-parallel executor for select queries."""

from __future__ import annotations

import atexit
import json
import multiprocessing
import threading
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DisconnectedQuery, EvaluationTimeout
from .graph import ErGraph, Node
from .lang.ast import And, Cmp, Const, Not, Or, Pattern, SelectStmt, Var, format_expr
from .literals import compare, parse_number

# Inputs smaller than this are joined bucket by bucket in-process even when
# parallelism > 1; the worker round trip costs more than it saves.
PARALLEL_MIN_ROWS = 20_000


# -- algebra ----------------------------------------------------------------


@dataclass(frozen=True)
class StarBlock:
    """Patterns sharing one subject term."""

    subject: Var | Node
    patterns: tuple[Pattern, ...]

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for p in self.patterns for v in p.variables)

    @property
    def label(self) -> str:
        return str(self.subject) if isinstance(self.subject, Var) else self.subject.id


@dataclass(frozen=True)
class ChainLink:
    left: int
    right: int
    variables: tuple[str, ...]


@dataclass(frozen=True)
class AlgebraTree:
    projection: tuple[str, ...]
    blocks: tuple[StarBlock, ...]
    links: tuple[ChainLink, ...]
    filter: object = None

    @property
    def leaf_count(self) -> int:
        return sum(len(b.patterns) for b in self.blocks)


def build_algebra(stmt: SelectStmt, allow_product: bool = False) -> AlgebraTree:
    """Group patterns into star blocks by subject and link blocks that share variables."""
    order: list = []
    grouped: dict = defaultdict(list)
    for p in stmt.patterns:
        if p.subject not in grouped:
            order.append(p.subject)
        grouped[p.subject].append(p)
    blocks = tuple(StarBlock(s, tuple(grouped[s])) for s in order)
    links = []
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            shared = blocks[i].variables & blocks[j].variables
            if shared:
                links.append(ChainLink(i, j, tuple(sorted(shared))))
    if len(blocks) > 1 and not allow_product:
        seen = {0}
        frontier = [0]
        while frontier:
            b = frontier.pop()
            for link in links:
                other = link.right if link.left == b else link.left if link.right == b else None
                if other is not None and other not in seen:
                    seen.add(other)
                    frontier.append(other)
        if len(seen) != len(blocks):
            raise DisconnectedQuery("pattern groups share no variable; pass allow_product to permit a cartesian product")
    return AlgebraTree(stmt.output_columns, blocks, tuple(links), stmt.filter)


# -- logical plan -----------------------------------------------------------


@dataclass(frozen=True)
class Operator:
    kind: str  # LOAD SPLIT STARJOIN CHAINJOIN FILTER STORE
    inputs: tuple[int, ...] = ()
    predicates: tuple[str, ...] = ()
    block: int | None = None
    variables: tuple[str, ...] = ()
    expr: object = None
    partition_key: str | None = None

    def render(self, plan: "LogicalPlan") -> str:
        if self.kind == "LOAD":
            return "LOAD triples"
        if self.kind == "SPLIT":
            return "SPLIT " + " ".join(self.predicates or ("*",))
        if self.kind == "STARJOIN":
            b = plan.tree.blocks[self.block]
            n = len(b.patterns)
            text = f"STARJOIN {b.label} [{n} pattern{'s' if n != 1 else ''}]"
            if self.expr is not None:
                text += f" where ({format_expr(self.expr)})"
            return text
        if self.kind == "CHAINJOIN":
            return "CHAINJOIN " + " ".join("?" + v for v in self.variables)
        if self.kind == "FILTER":
            return f"FILTER ({format_expr(self.expr)})"
        if self.kind == "STORE":
            return "STORE " + " ".join("?" + v for v in self.variables)
        return self.kind


@dataclass(frozen=True)
class LogicalPlan:
    tree: AlgebraTree
    operators: tuple[Operator, ...]

    def count(self, kind: str) -> int:
        return sum(1 for op in self.operators if op.kind == kind)

    @property
    def kinds(self) -> list[str]:
        return [op.kind for op in self.operators]


def explain(plan: LogicalPlan) -> str:
    """One line per operator in execution order."""
    return "\n".join(op.render(plan) for op in plan.operators) + "\n"


def _predicate_key(p: Pattern) -> str | None:
    return None if isinstance(p.predicate, Var) else p.predicate.id


def _estimate(block: StarBlock, graph: ErGraph | None) -> int:
    if graph is None:
        return 0
    sizes = [len(graph.partition(k)) if k is not None else len(graph.triples) for k in map(_predicate_key, block.patterns)]
    return min(sizes)


def _conjuncts(expr) -> list:
    if expr is None:
        return []
    if isinstance(expr, And):
        return [c for item in expr.items for c in _conjuncts(item)]
    return [expr]


def expr_variables(expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Cmp):
        return expr_variables(expr.left) | expr_variables(expr.right)
    if isinstance(expr, (And, Or)):
        return set().union(*(expr_variables(i) for i in expr.items))
    if isinstance(expr, Not):
        return expr_variables(expr.item)
    return set()


def _join(items: list):
    if not items:
        return None
    return items[0] if len(items) == 1 else And(tuple(items))


def compile_plan(tree: AlgebraTree, graph: ErGraph | None = None, pushdown: bool = False) -> LogicalPlan:
    """LOAD -> SPLIT -> STARJOIN per block -> CHAINJOINs (smallest estimate first) -> FILTER -> STORE.

    With ``pushdown`` a conjunct whose variables all live in one block is
    evaluated inside that block's star join instead of the FILTER stage.
    """
    predicates = sorted({k for b in tree.blocks for p in b.patterns if (k := _predicate_key(p)) is not None})
    ops: list[Operator] = [Operator("LOAD"), Operator("SPLIT", (0,), tuple(predicates))]
    residual = _conjuncts(tree.filter)
    pushed: dict[int, list] = defaultdict(list)
    if pushdown:
        kept = []
        for c in residual:
            owner = next((i for i, b in enumerate(tree.blocks) if expr_variables(c) <= b.variables), None)
            if owner is None:
                kept.append(c)
            else:
                pushed[owner].append(c)
        residual = kept

    if len(tree.blocks) == 1 and tree.leaf_count == 1 and not pushed:
        last = 1
    else:
        estimates = [_estimate(b, graph) for b in tree.blocks]
        remaining = set(range(len(tree.blocks)))
        first = min(remaining, key=lambda i: (estimates[i], i))
        remaining.discard(first)
        order = [first]
        bound = set(tree.blocks[first].variables)
        while remaining:
            linked = [i for i in remaining if tree.blocks[i].variables & bound]
            pool = linked or sorted(remaining)
            nxt = min(pool, key=lambda i: (estimates[i], i))
            order.append(nxt)
            remaining.discard(nxt)
            bound |= tree.blocks[nxt].variables
        star_ops = {}
        for i in order:
            b = tree.blocks[i]
            key = b.subject.name if isinstance(b.subject, Var) else None
            ops.append(Operator("STARJOIN", (1,), block=i, expr=_join(pushed.get(i, [])), partition_key=key))
            star_ops[i] = len(ops) - 1
        current = star_ops[order[0]]
        bound = set(tree.blocks[order[0]].variables)
        for i in order[1:]:
            shared = tuple(sorted(bound & tree.blocks[i].variables))
            ops.append(Operator("CHAINJOIN", (current, star_ops[i]), variables=shared, partition_key=shared[0] if shared else None))
            current = len(ops) - 1
            bound |= tree.blocks[i].variables
        last = current
    if residual:
        ops.append(Operator("FILTER", (last,), expr=_join(residual)))
        last = len(ops) - 1
    ops.append(Operator("STORE", (last,), variables=tree.projection))
    return LogicalPlan(tree, tuple(ops))


def plan_query(stmt: SelectStmt, graph: ErGraph | None = None, pushdown: bool = False, allow_product: bool = False) -> LogicalPlan:
    return compile_plan(build_algebra(stmt, allow_product=allow_product), graph, pushdown)


# -- binding tables ---------------------------------------------------------


@dataclass(frozen=True)
class BindingTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[Node, ...], ...]
    stats: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.rows)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(_cell(n) for n in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps([{c: n.id for c, n in zip(self.columns, row)} for row in self.rows], ensure_ascii=False)

    def render(self, fmt: str = "tsv") -> str:
        return self.to_json() + "\n" if fmt == "json" else self.to_tsv()


def _cell(n: Node) -> str:
    return n.id.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


# -- execution kernels (top level so worker processes can run them) ---------


def natural_join(left_cols: tuple, left_rows: list, right_cols: tuple, right_rows: list) -> tuple[tuple, list]:
    """Hash join on all shared columns; a cartesian product when none are shared."""
    shared = [c for c in left_cols if c in right_cols]
    extra = [i for i, c in enumerate(right_cols) if c not in left_cols]
    cols = tuple(left_cols) + tuple(right_cols[i] for i in extra)
    if not left_rows or not right_rows:
        return cols, []
    li = [left_cols.index(c) for c in shared]
    ri = [right_cols.index(c) for c in shared]
    build, probe, build_is_left = (left_rows, right_rows, True) if len(left_rows) <= len(right_rows) else (right_rows, left_rows, False)
    bk, pk = (li, ri) if build_is_left else (ri, li)
    table: dict = defaultdict(list)
    if len(bk) == 1:
        k = bk[0]
        for row in build:
            table[row[k]].append(row)
        keyed = ((row[pk[0]], row) for row in probe)
    else:
        for row in build:
            table[tuple(row[i] for i in bk)].append(row)
        keyed = ((tuple(row[i] for i in pk), row) for row in probe)
    out = []
    for key, prow in keyed:
        matches = table.get(key)
        if not matches:
            continue
        for brow in matches:
            lrow, rrow = (brow, prow) if build_is_left else (prow, brow)
            out.append(lrow + tuple(rrow[i] for i in extra))
    return cols, out


def _star_bucket(tables: Sequence[tuple[tuple, list]]) -> tuple[tuple, list]:
    canonical: list[str] = []
    for cols, _ in tables:
        canonical += [c for c in cols if c not in canonical]
    # smallest input first; output columns are reordered to a fixed layout
    ordered = sorted(tables, key=lambda t: len(t[1]))
    cols, rows = ordered[0]
    for other_cols, other_rows in ordered[1:]:
        if not rows:
            rows = []
            break
        cols, rows = natural_join(cols, rows, other_cols, other_rows)
    picks = [cols.index(c) if c in cols else None for c in canonical]
    if not rows or None in picks:
        return tuple(canonical), []
    if picks == list(range(len(canonical))):
        return tuple(canonical), rows
    return tuple(canonical), [tuple(row[i] for i in picks) for row in rows]


def _chain_bucket(args) -> tuple[tuple, list]:
    return natural_join(*args)


def _star_task(tables):
    return _star_bucket(tables)


_pools: dict[int, ProcessPoolExecutor] = {}
_pool_lock = threading.Lock()


def _pool(workers: int) -> ProcessPoolExecutor:
    with _pool_lock:
        pool = _pools.get(workers)
        if pool is None:
            try:
                ctx = multiprocessing.get_context("fork")
            except ValueError:
                ctx = None
            pool = ProcessPoolExecutor(max_workers=workers, mp_context=ctx)
            _pools[workers] = pool
        return pool


@atexit.register
def _shutdown_pools() -> None:
    for pool in _pools.values():
        pool.shutdown(wait=False, cancel_futures=True)
    _pools.clear()


def _bucketize(cols: tuple, rows: list, key: str, n: int) -> list[list]:
    i = cols.index(key)
    buckets: list[list] = [[] for _ in range(n)]
    for row in rows:
        buckets[row[i] % n].append(row)
    return buckets


# -- executor ---------------------------------------------------------------


class _Deadline:
    def __init__(self, timeout: float | None):
        self.end = None if timeout is None else time.monotonic() + timeout

    def check(self) -> None:
        if self.end is not None and time.monotonic() > self.end:
            raise EvaluationTimeout("query exceeded its time limit")


def scan_pattern(p: Pattern, g: ErGraph) -> tuple[tuple, list]:
    """Bindings of one triple pattern as integer-coded rows over its variables."""
    index = g.node_index
    if isinstance(p.predicate, Var):
        sources = [(index[Node(pid)], rows) for pid, rows in g.encoded_partitions.items()]
    else:
        rows = g.encoded_partitions.get(p.predicate.id)
        sources = [(index.get(p.predicate), rows)] if rows else []
    terms = (p.subject, p.predicate, p.object)
    consts = []
    for pos, t in enumerate(terms):
        if not isinstance(t, Var):
            code = index.get(t)
            if code is None:
                return tuple(p.variables), []
            consts.append((pos, code))
    cols = tuple(p.variables)
    slots = [[i for i, t in enumerate(terms) if isinstance(t, Var) and t.name == v] for v in cols]
    out = []
    for pcode, pairs in sources:
        for s, o in pairs:
            triple = (s, pcode, o)
            if any(triple[pos] != code for pos, code in consts):
                continue
            if any(len(pos) > 1 and len({triple[i] for i in pos}) > 1 for pos in slots):
                continue
            out.append(tuple(triple[pos[0]] for pos in slots))
    return cols, out


def effective_boolean(value: str | None) -> bool:
    if value is None:
        return False
    number = parse_number(value)
    if number is not None:
        return number != 0
    return value != "" and value.lower() != "false"


def evaluate_expr(expr, binding: dict[str, Node]):
    """Evaluate a filter expression; comparisons yield bools, terms yield strings."""
    if isinstance(expr, Var):
        node = binding.get(expr.name)
        return None if node is None else node.id
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Cmp):
        left, right = evaluate_expr(expr.left, binding), evaluate_expr(expr.right, binding)
        if left is None or right is None:
            return False
        left = left if isinstance(left, str) else ("true" if left else "false")
        right = right if isinstance(right, str) else ("true" if right else "false")
        return compare(expr.op, left, right)
    if isinstance(expr, And):
        return all(_truth(evaluate_expr(i, binding)) for i in expr.items)
    if isinstance(expr, Or):
        return any(_truth(evaluate_expr(i, binding)) for i in expr.items)
    if isinstance(expr, Not):
        return not _truth(evaluate_expr(expr.item, binding))
    raise TypeError(f"not an expression: {expr!r}")


def _truth(value) -> bool:
    return value if isinstance(value, bool) else effective_boolean(value)


def _filter_rows(expr, cols: tuple, rows: list, table: list[Node], deadline: _Deadline) -> list:
    out = []
    for n, row in enumerate(rows):
        if n % 4096 == 0:
            deadline.check()
        binding = {c: table[v] for c, v in zip(cols, row)}
        if _truth(evaluate_expr(expr, binding)):
            out.append(row)
    return out


def execute(
    plan: LogicalPlan,
    g: ErGraph,
    parallelism: int = 1,
    timeout: float | None = None,
    min_parallel_rows: int | None = None,
) -> BindingTable:
    """Run a plan over a snapshot; the sorted result is identical for every parallelism level.

    Star joins are hash-partitioned on the subject variable and chain joins on
    the join variable into ``parallelism`` buckets. Buckets go to a process pool
    when the stage input reaches ``min_parallel_rows`` rows.
    """
    deadline = _Deadline(timeout)
    workers = max(1, int(parallelism))
    threshold = PARALLEL_MIN_ROWS if min_parallel_rows is None else min_parallel_rows
    tree = plan.tree
    stats: dict = {"stages": [], "join_seconds": 0.0, "parallelism": workers}
    results: dict[int, tuple[tuple, list]] = {}
    table = g.node_table

    def run(fn, tasks: list, size: int) -> list:
        if workers > 1 and size >= threshold and len(tasks) > 1:
            futures = [_pool(workers).submit(fn, t) for t in tasks]
            out = []
            for f in futures:
                remaining = None if deadline.end is None else max(0.0, deadline.end - time.monotonic())
                try:
                    out.append(f.result(timeout=remaining))
                except FutureTimeout:
                    raise EvaluationTimeout("query exceeded its time limit") from None
            return out
        out = []
        for t in tasks:
            deadline.check()
            out.append(fn(t))
        return out

    def take(i: int) -> tuple[tuple, list]:
        if i == 1:  # degenerate plan reads the single pattern straight off SPLIT
            return scan_pattern(tree.blocks[0].patterns[0], g)
        return results.pop(i)

    for idx, op in enumerate(plan.operators):
        deadline.check()
        if op.kind in ("LOAD", "SPLIT"):
            continue
        started = time.perf_counter()
        if op.kind == "STARJOIN":
            block = tree.blocks[op.block]
            scans = [scan_pattern(p, g) for p in block.patterns]
            size = sum(len(r) for _, r in scans)
            key = op.partition_key
            if key is not None and workers > 1:
                per_bucket = [_bucketize(c, r, key, workers) for c, r in scans]
                tasks = [[(scans[j][0], per_bucket[j][b]) for j in range(len(scans))] for b in range(workers)]
            else:
                tasks = [scans]
            parts = run(_star_task, tasks, size)
            cols = parts[0][0]
            rows = [row for _, rs in parts for row in rs]
            if op.expr is not None:
                rows = _filter_rows(op.expr, cols, rows, table, deadline)
            results[idx] = (cols, rows)
            stats["join_seconds"] += time.perf_counter() - started
        elif op.kind == "CHAINJOIN":
            (lc, lr), (rc, rr) = results.pop(op.inputs[0]), results.pop(op.inputs[1])
            key = op.partition_key
            if key is not None and workers > 1:
                lb, rb = _bucketize(lc, lr, key, workers), _bucketize(rc, rr, key, workers)
                tasks = [(lc, lb[b], rc, rb[b]) for b in range(workers)]
            else:
                tasks = [(lc, lr, rc, rr)]
            parts = run(_chain_bucket, tasks, len(lr) + len(rr))
            cols = parts[0][0]
            results[idx] = (cols, [row for _, rs in parts for row in rs])
            stats["join_seconds"] += time.perf_counter() - started
        elif op.kind == "FILTER":
            cols, rows = take(op.inputs[0])
            results[idx] = (cols, _filter_rows(op.expr, cols, rows, table, deadline))
        elif op.kind == "STORE":
            cols, rows = take(op.inputs[0])
            picks = [cols.index(v) for v in op.variables]
            projected = {tuple(table[row[i]] for i in picks) for row in rows}
            ordered = tuple(sorted(projected))
            stats["stages"].append((op.kind, len(ordered)))
            return BindingTable(tuple(op.variables), ordered, stats)
        stats["stages"].append((op.kind, len(results[idx][1])))
    raise ValueError("plan has no STORE operator")


def run_select(
    stmt: SelectStmt,
    g: ErGraph,
    parallelism: int = 1,
    timeout: float | None = None,
    pushdown: bool = False,
    allow_product: bool = False,
) -> BindingTable:
    plan = plan_query(stmt, g, pushdown=pushdown, allow_product=allow_product)
    return execute(plan, g, parallelism=parallelism, timeout=timeout)
