"""Rewrite sugar statements into core query forms."""

from __future__ import annotations

from ..errors import UnknownFilterKey
from ..graph import literal, uri
from ..metadata import DERIVATION, EVOLUTION, FILTER_KEYS, TIMESERIES, InstantRange, MetadataRequest
from .ast import And, AttrCmp, Cmp, Const, EntityStmt, MetadataStmt, Not, Or, Pattern, SelectStmt, Var

_MODES = {"evolutionOf": EVOLUTION, "derivationOf": DERIVATION, "timeseriesOf": TIMESERIES}


def _attributes(expr, seen: list[str]) -> list[str]:
    if isinstance(expr, AttrCmp):
        if expr.attr not in seen:
            seen.append(expr.attr)
    elif isinstance(expr, (And, Or)):
        for item in expr.items:
            _attributes(item, seen)
    elif isinstance(expr, Not):
        _attributes(expr.item, seen)
    return seen


def _mirror(expr, names: dict[str, str]):
    if isinstance(expr, AttrCmp):
        return Cmp(expr.op, Var(names[expr.attr]), Const(expr.value))
    if isinstance(expr, And):
        return And(tuple(_mirror(i, names) for i in expr.items))
    if isinstance(expr, Or):
        return Or(tuple(_mirror(i, names) for i in expr.items))
    if isinstance(expr, Not):
        return Not(_mirror(expr.item, names))
    raise TypeError(f"unexpected entity filter node {expr!r}")


def translate_entity(stmt: EntityStmt) -> SelectStmt:
    """``entity T <filter>`` becomes a star query on ``?e``.

    One mandatory ``?e @attr ?vN`` pattern per distinct attribute (numbered by
    first occurrence) and a FILTER mirroring the boolean tree.
    """
    subject = Var("e")
    patterns = [Pattern(subject, uri("@type"), literal(stmt.entity_type))]
    expr = None
    if stmt.filter is not None:
        names = {attr: f"v{i}" for i, attr in enumerate(_attributes(stmt.filter, []), start=1)}
        patterns += [Pattern(subject, uri("@" + attr), Var(v)) for attr, v in names.items()]
        expr = _mirror(stmt.filter, names)
    return SelectStmt((subject,), tuple(patterns), expr, stmt.span)


def translate_metadata(stmt: MetadataStmt) -> MetadataRequest:
    """Map a metadata statement to an engine request; ``when`` comparisons become instant ranges."""
    filters: dict = {}
    for key, op, value in stmt.filters:
        key = key.lower()
        if key not in FILTER_KEYS:
            raise UnknownFilterKey(key)
        if key == "when":
            rng = InstantRange.from_comparison(op, value)
            prev = filters.get("when")
            filters["when"] = rng if prev is None else prev.intersect(rng)
        else:
            filters[key] = value
    return MetadataRequest(_MODES[stmt.mode], stmt.target, filters)
