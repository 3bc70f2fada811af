"""Statement trees for the five query families and their canonical text form.

Trees are immutable. ``span`` fields record (offset, length) in the source
and are excluded from equality, so a printed and re-parsed statement compares
equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..graph import BLANK, LITERAL, Node
from ..paths import PathRegex
from ..summarize import CorrelationCondition

# -- boolean expressions ----------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str  # without the leading '?'

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class Const:
    value: str
    quoted: bool = True

    def __str__(self) -> str:
        return quote(self.value) if self.quoted else self.value


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class AttrCmp:
    """``\\attr op 'value'`` inside an entity statement."""

    attr: str
    op: str
    value: str


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


Expr = Union[Cmp, AttrCmp, And, Or, Not, Var, Const]


@dataclass(frozen=True)
class Pattern:
    subject: Union[Var, Node]
    predicate: Union[Var, Node]
    object: Union[Var, Node]

    @property
    def terms(self) -> tuple:
        return (self.subject, self.predicate, self.object)

    @property
    def variables(self) -> tuple[str, ...]:
        seen: list[str] = []
        for t in self.terms:
            if isinstance(t, Var) and t.name not in seen:
                seen.append(t.name)
        return tuple(seen)


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class EntityStmt:
    entity_type: str
    filter: Expr | None = None
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class CorrelationStmt:
    condition: CorrelationCondition
    into: str | None = None
    timed: bool = False
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RelationshipStmt:
    regex: PathRegex
    into: str | None = None
    into_folder: bool = False
    timed: bool = False
    span: tuple[int, int] = field(default=(0, 0), compare=False)


METADATA_MODES = ("evolutionOf", "derivationOf", "timeseriesOf")


@dataclass(frozen=True)
class MetadataStmt:
    mode: str
    target: str
    filters: tuple[tuple[str, str, str], ...] = ()  # (key, comparator, value)
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SelectStmt:
    projection: tuple[Var, ...]  # empty means '*'
    patterns: tuple[Pattern, ...]
    filter: Expr | None = None
    span: tuple[int, int] = field(default=(0, 0), compare=False)

    @property
    def variables(self) -> tuple[str, ...]:
        seen: list[str] = []
        for p in self.patterns:
            for v in p.variables:
                if v not in seen:
                    seen.append(v)
        return tuple(seen)

    @property
    def output_columns(self) -> tuple[str, ...]:
        if self.projection:
            return tuple(v.name for v in self.projection)
        return self.variables


Statement = Union[EntityStmt, CorrelationStmt, RelationshipStmt, MetadataStmt, SelectStmt]


# -- printing ---------------------------------------------------------------


def quote(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _term(t) -> str:
    if isinstance(t, Var):
        return str(t)
    if t.kind == LITERAL:
        return quote(t.id)
    if t.kind == BLANK:
        return "_:" + t.id
    return t.id


_PRECEDENCE = {Or: 1, And: 2}


def format_expr(e, entity: bool = False) -> str:
    and_word, or_word, not_word = ("AND", "OR", "NOT ") if entity else ("&&", "||", "!")
    if isinstance(e, (Or, And)):
        word = or_word if isinstance(e, Or) else and_word
        parts = []
        for item in e.items:
            text = format_expr(item, entity)
            if isinstance(item, (Or, And)) and _PRECEDENCE[type(item)] <= _PRECEDENCE[type(e)]:
                text = f"({text})"
            parts.append(text)
        return f" {word} ".join(parts)
    if isinstance(e, Not):
        inner = format_expr(e.item, entity)
        if not isinstance(e.item, (Var, Const, Not)) and not (entity and isinstance(e.item, AttrCmp)):
            inner = f"({inner})"
        return not_word + inner
    if isinstance(e, AttrCmp):
        return f"\\{e.attr}{e.op}{quote(e.value)}"
    if isinstance(e, Cmp):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    return str(e)


def _operand(e) -> str:
    text = format_expr(e)
    if isinstance(e, (And, Or, Cmp)):
        return f"({text})"
    return text


def format_statement(stmt: Statement) -> str:
    """Canonical source text; parsing it yields an equal statement."""
    if isinstance(stmt, EntityStmt):
        text = f"entity {stmt.entity_type}"
        if stmt.filter is not None:
            text += " " + format_expr(stmt.filter, entity=True)
        return text
    if isinstance(stmt, CorrelationStmt):
        text = "correlation " + stmt.condition.to_text()
        if stmt.condition.scope:
            text += f" within {stmt.condition.scope}"
        if stmt.into:
            text += f" into {stmt.into}"
        if stmt.timed:
            text += " timed"
        return text
    if isinstance(stmt, RelationshipStmt):
        text = "relationship " + stmt.regex.text
        if stmt.into:
            text += " into " + ("folder " if stmt.into_folder else "") + stmt.into
        if stmt.timed:
            text += " timed"
        return text
    if isinstance(stmt, MetadataStmt):
        text = f"metadata {stmt.mode} {stmt.target}"
        for key, op, value in stmt.filters:
            text += f" \\{key}{op}{quote(value)}"
        return text
    if isinstance(stmt, SelectStmt):
        head = " ".join(str(v) for v in stmt.projection) if stmt.projection else "*"
        body = [" ".join(_term(t) for t in p.terms) + "." for p in stmt.patterns]
        if stmt.filter is not None:
            body.append(f"FILTER ({format_expr(stmt.filter)})")
        return f"select {head} where {{ " + " ".join(body) + " }"
    raise TypeError(f"not a statement: {stmt!r}")
