"""Scalar typing and comparison of literal lexical forms.

Literals are stored as text. When two literals are compared they are treated
as numbers if both parse as numbers, as instants if both parse as ISO-8601
instants, and as plain strings otherwise.
"""

from __future__ import annotations

import operator
import re
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from functools import lru_cache

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_INSTANT = re.compile(r"^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d{1,6})?)?)?(Z|[+-]\d{2}:?\d{2})?$")

COMPARATORS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@lru_cache(maxsize=65536)
def parse_number(text: str) -> Decimal | None:
    if not _NUMBER.match(text):
        return None
    try:
        return Decimal(text)
    except InvalidOperation:
        return None


@lru_cache(maxsize=65536)
def parse_instant(text: str) -> datetime | None:
    """Parse an ISO-8601 date or date-time; naive values are taken as UTC."""
    if not _INSTANT.match(text):
        return None
    raw = text.replace(" ", "T", 1)
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    elif re.search(r"[+-]\d{4}$", raw) and "T" in raw:
        raw = raw[:-2] + ":" + raw[-2:]
    try:
        value = datetime.fromisoformat(raw)
    except ValueError:
        return None
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value


def format_instant(value: datetime) -> str:
    """Canonical millisecond-precision UTC rendering, e.g. ``2017-12-01T09:30:00.000Z``."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    value = value.astimezone(timezone.utc)
    return value.strftime("%Y-%m-%dT%H:%M:%S.") + f"{value.microsecond // 1000:03d}Z"


def scalar_kind(text: str) -> str:
    number = parse_number(text)
    if number is not None:
        return "integer" if number == number.to_integral_value() and "." not in text and "e" not in text.lower() else "decimal"
    if parse_instant(text) is not None:
        return "instant"
    return "string"


def _coerce_pair(a: str, b: str):
    na, nb = parse_number(a), parse_number(b)
    if na is not None and nb is not None:
        return na, nb
    ia, ib = parse_instant(a), parse_instant(b)
    if ia is not None and ib is not None:
        return ia, ib
    return a, b


def compare(op: str, a: str, b: str) -> bool:
    """Apply comparator ``op`` to two lexical forms under the literal typing rules."""
    x, y = _coerce_pair(a, b)
    return COMPARATORS[op](x, y)


def literal_sort_key(text: str) -> tuple:
    """Total order: numbers, then instants, then strings."""
    number = parse_number(text)
    if number is not None:
        return (0, number, text)
    instant = parse_instant(text)
    if instant is not None:
        return (1, instant, text)
    return (2, text, text)
