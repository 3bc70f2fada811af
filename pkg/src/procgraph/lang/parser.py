"""Hand-written lexer and recursive-descent parser for the statement families."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import QuerySyntaxError, RegexSyntaxError
from ..graph import Node, blank, literal, uri
from ..literals import parse_number
from ..paths import compile_regex
from ..summarize import CorrelationCondition
from .ast import (
    METADATA_MODES,
    And,
    AttrCmp,
    Cmp,
    Const,
    CorrelationStmt,
    EntityStmt,
    MetadataStmt,
    Not,
    Or,
    Pattern,
    RelationshipStmt,
    SelectStmt,
    Statement,
    Var,
)

COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")
FILTER_KEYS = ("what", "how", "when", "who", "where", "which", "why")

_NAME_CHAR = r"[A-Za-z0-9_\-:/#]"
_NAME = re.compile(rf"{_NAME_CHAR}+(?:\.{_NAME_CHAR}+)*")
_OPS = ("!=", "<=", ">=", "&&", "||", "=", "<", ">", "!")
_PUNCT = "(){}[],.;\\*"


@dataclass(frozen=True)
class Token:
    kind: str  # name, string, var, attr, blank, op, punct, eof
    value: str
    start: int
    end: int

    def is_word(self, *words: str) -> bool:
        return self.kind == "name" and self.value.lower() in words


def line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "#":
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if c in "'\"`":
            close = "'" if c == "`" else c
            j = i + 1
            chars = []
            while j < n and text[j] != close:
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                chars.append(text[j])
                j += 1
            if j >= n:
                line, col = line_col(text, i)
                exc = QuerySyntaxError("unterminated string", line, col)
                exc.at_end = True
                raise exc
            tokens.append(Token("string", "".join(chars), i, j + 1))
            i = j + 1
            continue
        if c == "?" or c == "$":
            m = _NAME.match(text, i + 1)
            if m is None:
                line, col = line_col(text, i)
                raise QuerySyntaxError("empty variable name", line, col)
            tokens.append(Token("var", m.group(), i, m.end()))
            i = m.end()
            continue
        if c == "@":
            m = _NAME.match(text, i + 1)
            if m is None:
                line, col = line_col(text, i)
                raise QuerySyntaxError("empty attribute name", line, col)
            tokens.append(Token("attr", m.group(), i, m.end()))
            i = m.end()
            continue
        if text.startswith("_:", i):
            m = _NAME.match(text, i + 2)
            if m is None:
                line, col = line_col(text, i)
                raise QuerySyntaxError("empty blank node label", line, col)
            tokens.append(Token("blank", m.group(), i, m.end()))
            i = m.end()
            continue
        op = next((o for o in _OPS if text.startswith(o, i)), None)
        if op is not None:
            tokens.append(Token("op", op, i, i + len(op)))
            i += len(op)
            continue
        m = _NAME.match(text, i)
        if m is not None:
            tokens.append(Token("name", m.group(), i, m.end()))
            i = m.end()
            continue
        if c in _PUNCT:
            tokens.append(Token("punct", c, i, i + 1))
            i += 1
            continue
        line, col = line_col(text, i)
        raise QuerySyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", n, n))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.value)


_RELATIONSHIP = re.compile(r"(?:\s|#[^\n]*)*(?i:relationship)(?![A-Za-z0-9_\-:/#])")


class Parser:
    def __init__(self, text: str):
        self.text = text
        m = _RELATIONSHIP.match(text)
        if m is not None:
            # the path regex has its own lexer; only the keyword is tokenized here
            start = m.end() - len("relationship")
            self.tokens = [Token("name", text[start:m.end()], start, m.end()), Token("eof", "", len(text), len(text))]
        else:
            self.tokens = tokenize(text)
        self.i = 0

    # -- helpers ---------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, message: str, expected=(), tok: Token | None = None) -> QuerySyntaxError:
        tok = tok or self.tok
        line, col = line_col(self.text, tok.start)
        exc = QuerySyntaxError(f"{message}, got {_describe(tok)}", line, col, frozenset(expected))
        exc.at_end = tok.kind == "eof"
        return exc

    def at_punct(self, *chars: str) -> bool:
        return self.tok.kind == "punct" and self.tok.value in chars

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.value in ops

    def expect_punct(self, char: str) -> Token:
        if not self.at_punct(char):
            raise self.error(f"expected {char!r}", [char])
        return self.advance()

    def expect_name(self, what: str) -> Token:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}", [what])
        return self.advance()

    def expect_comparator(self) -> str:
        if not self.at_op(*COMPARATORS):
            raise self.error("expected comparator", COMPARATORS)
        return self.advance().value

    def finish(self, first: Token) -> tuple[int, int]:
        while self.at_punct(";"):
            self.advance()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input", ["end of input"])
        last = self.tokens[self.i - 1] if self.i > 0 else first
        return (first.start, last.end - first.start)

    # -- dispatch --------------------------------------------------------

    def statement(self) -> Statement:
        first = self.tok
        if first.is_word("entity"):
            return self.entity()
        if first.is_word("correlation"):
            return self.correlation()
        if first.is_word("relationship"):
            return self.relationship()
        if first.is_word("metadata") or first.is_word(*(m.lower() for m in METADATA_MODES)):
            return self.metadata()
        if first.is_word("select"):
            return self.select()
        raise self.error(
            "expected a statement keyword",
            ["entity", "correlation", "relationship", "metadata", "select"],
        )

    # -- entity ----------------------------------------------------------

    def entity(self) -> EntityStmt:
        first = self.advance()
        entity_type = self.expect_name("entity type").value
        expr = None
        if self.tok.kind != "eof" and not self.at_punct(";"):
            expr = self.bool_or(self.attr_cmp)
        return EntityStmt(entity_type, expr, self.finish(first))

    def attr_cmp(self):
        if not self.at_punct("\\"):
            raise self.error("expected attribute filter", ["\\attribute"])
        self.advance()
        name = self.expect_name("attribute name").value
        op = self.expect_comparator()
        if self.tok.kind != "string":
            raise self.error("expected quoted value", ["quoted value"])
        return AttrCmp(name, op, self.advance().value)

    def bool_or(self, leaf):
        items = [self.bool_and(leaf)]
        while self.at_op("||") or self.tok.is_word("or"):
            self.advance()
            items.append(self.bool_and(leaf))
        return items[0] if len(items) == 1 else Or(tuple(items))

    def bool_and(self, leaf):
        items = [self.bool_not(leaf)]
        while self.at_op("&&") or self.tok.is_word("and"):
            self.advance()
            items.append(self.bool_not(leaf))
        return items[0] if len(items) == 1 else And(tuple(items))

    def bool_not(self, leaf):
        if self.at_op("!") or self.tok.is_word("not"):
            self.advance()
            return Not(self.bool_not(leaf))
        if self.at_punct("("):
            self.advance()
            inner = self.bool_or(leaf)
            self.expect_punct(")")
            return inner
        return leaf()

    # -- correlation -----------------------------------------------------

    def correlation(self) -> CorrelationStmt:
        first = self.advance()
        head = self.expect_name("correlation condition")
        if "." in head.value:
            x_var, attr_x = head.value.split(".", 1)
            if not self.at_op("="):
                raise self.error("expected '='", ["="])
            self.advance()
            other = self.expect_name("y.attribute")
            if "." not in other.value:
                raise self.error("expected y.attribute", ["y.attribute"], other)
            y_var, attr_y = other.value.split(".", 1)
            if x_var == y_var:
                raise self.error("correlation compares two distinct entities", [], other)
            cond = CorrelationCondition.attr_equality(attr_x, attr_y)
        else:
            args: list[str] = []
            if self.at_punct("("):
                self.advance()
                while not self.at_punct(")"):
                    if self.tok.kind not in ("name", "string"):
                        raise self.error("expected argument", ["argument", ")"])
                    args.append(self.advance().value)
                    if self.at_punct(","):
                        self.advance()
                    elif not self.at_punct(")"):
                        raise self.error("expected ',' or ')'", [",", ")"])
                self.advance()
            cond = CorrelationCondition.registered(head.value, tuple(args))
        scope = into = None
        timed = False
        while self.tok.kind == "name":
            if self.tok.is_word("within") and scope is None:
                self.advance()
                scope = self.expect_name("entity type").value
            elif self.tok.is_word("into") and into is None:
                self.advance()
                into = self.expect_name("folder name").value
            elif self.tok.is_word("timed") and not timed:
                self.advance()
                timed = True
            else:
                raise self.error("unexpected clause", ["within", "into", "timed"])
        if scope is not None:
            cond = cond.with_scope(scope)
        return CorrelationStmt(cond, into, timed, self.finish(first))

    # -- relationship ----------------------------------------------------

    _TAIL = re.compile(
        r"^(?P<rx>.*?)(?:\s+into\s+(?:(?P<folder>folder)\s+)?(?P<name>\S+))?(?:\s+(?P<timed>timed))?\s*;?\s*$",
        re.IGNORECASE | re.DOTALL,
    )

    def relationship(self) -> RelationshipStmt:
        first = self.advance()
        end = self.tokens[-1].start
        raw = self.text[first.end:end]
        body = re.sub(r"(^|\s)#[^\n]*", r"\1", raw)
        m = self._TAIL.match(body)
        rx_text = m.group("rx").strip()
        offset = first.end + (len(raw) - len(raw.lstrip()))
        try:
            regex = compile_regex(rx_text)
        except RegexSyntaxError as exc:
            line, col = line_col(self.text, offset + exc.position)
            raise QuerySyntaxError(str(exc), line, col) from exc
        self.i = len(self.tokens) - 1
        last_end = first.end + len(raw.rstrip().rstrip(";").rstrip())
        return RelationshipStmt(
            regex,
            m.group("name"),
            bool(m.group("folder")),
            bool(m.group("timed")),
            (first.start, last_end - first.start),
        )

    # -- metadata --------------------------------------------------------

    def metadata(self) -> MetadataStmt:
        first = self.tok
        if first.is_word("metadata"):
            self.advance()
        mode_tok = self.tok
        mode = next((m for m in METADATA_MODES if mode_tok.is_word(m.lower())), None)
        if mode is None:
            raise self.error("expected metadata mode", METADATA_MODES)
        self.advance()
        if self.tok.kind not in ("name", "string"):
            raise self.error("expected artifact name", ["artifact name"])
        target = self.advance().value
        filters: list[tuple[str, str, str]] = []
        while self.at_punct("\\"):
            self.advance()
            filters.append(self.filter_item())
        if self.tok.is_word("filter"):
            self.advance()
            bracket = self.at_punct("[")
            if bracket:
                self.advance()
            while self.tok.kind == "name" or self.at_punct("\\"):
                if self.at_punct("\\"):
                    self.advance()
                filters.append(self.filter_item())
                if self.at_punct(","):
                    self.advance()
            if bracket:
                self.expect_punct("]")
        return MetadataStmt(mode, target, tuple(filters), self.finish(first))

    def filter_item(self) -> tuple[str, str, str]:
        key_tok = self.expect_name("filter key")
        key = key_tok.value
        op = self.expect_comparator()
        if key.lower() != "when" and op != "=":
            raise self.error(f"only '=' applies to {key!r}", ["="], self.tokens[self.i - 1])
        if self.tok.kind not in ("string", "name"):
            raise self.error("expected value", ["quoted value"])
        return (key, op, self.advance().value)

    # -- select ----------------------------------------------------------

    def select(self) -> SelectStmt:
        first = self.advance()
        projection: list[Var] = []
        if self.at_punct("*"):
            self.advance()
        else:
            while self.tok.kind == "var":
                projection.append(Var(self.advance().value))
            if not projection:
                raise self.error("expected projected variable", ["?variable", "*"])
        if self.tok.is_word("where"):
            self.advance()
        self.expect_punct("{")
        patterns: list[Pattern] = []
        filters = []
        while not self.at_punct("}"):
            if self.tok.is_word("filter"):
                self.advance()
                self.expect_punct("(")
                filters.append(self.bool_or(self.comparison))
                self.expect_punct(")")
            else:
                patterns.append(self.pattern())
            while self.at_punct("."):
                self.advance()
            if self.tok.kind == "eof":
                raise self.error("expected '}'", ["}"])
        self.advance()
        if not patterns:
            raise self.error("select needs at least one pattern", ["pattern"])
        expr = None
        if len(filters) == 1:
            expr = filters[0]
        elif filters:
            expr = And(tuple(filters))
        stmt = SelectStmt(tuple(projection), tuple(patterns), expr, self.finish(first))
        known = set(stmt.variables)
        for v in projection:
            if v.name not in known:
                raise QuerySyntaxError(f"projected variable ?{v.name} occurs in no pattern", *line_col(self.text, first.start))
        return stmt

    def pattern(self) -> Pattern:
        s = self.term("subject")
        if isinstance(s, Node) and s.kind == "literal":
            raise self.error("literal cannot be a subject", ["?variable", "name"], self.tokens[self.i - 1])
        p = self.predicate()
        o = self.term("object", attribute=isinstance(p, Node) and p.id.startswith("@"))
        return Pattern(s, p, o)

    def predicate(self):
        tok = self.tok
        if tok.kind == "var":
            self.advance()
            return Var(tok.value)
        if tok.kind == "attr":
            self.advance()
            return uri("@" + tok.value)
        if tok.kind == "name" and not tok.is_word("filter"):
            self.advance()
            return uri(tok.value)
        raise self.error("expected predicate", ["?variable", "@attribute", "name"])

    def term(self, role: str, attribute: bool = False):
        tok = self.tok
        if tok.kind == "var":
            self.advance()
            return Var(tok.value)
        if tok.kind == "string":
            self.advance()
            return literal(tok.value)
        if tok.kind == "blank":
            self.advance()
            return blank(tok.value)
        if tok.kind == "name" and not tok.is_word("filter"):
            self.advance()
            if attribute or parse_number(tok.value) is not None:
                return literal(tok.value)
            return uri(tok.value)
        raise self.error(f"expected {role}", ["?variable", "name", "quoted value"])

    def comparison(self):
        left = self.unary()
        if self.at_op(*COMPARATORS):
            op = self.advance().value
            return Cmp(op, left, self.unary())
        return left

    def unary(self):
        if self.at_op("!"):
            self.advance()
            return Not(self.unary())
        tok = self.tok
        if self.at_punct("("):
            self.advance()
            inner = self.bool_or(self.comparison)
            self.expect_punct(")")
            return inner
        if tok.kind == "var":
            self.advance()
            return Var(tok.value)
        if tok.kind == "string":
            self.advance()
            return Const(tok.value, True)
        if tok.kind == "name":
            self.advance()
            return Const(tok.value, False)
        raise self.error("expected operand", ["?variable", "value", "("])


def parse(text: str) -> Statement:
    """Parse one statement. Raises QuerySyntaxError with line:column on failure."""
    return Parser(text).statement()


SHELL_COMMANDS = ("load", "folders", "paths", "explain", "format", "snapshot", "quit")
_STATEMENT_START = re.compile(
    r"(?i:entity|correlation|relationship|metadata|select|evolutionOf|derivationOf|timeseriesOf)\s"
    r"|\\(?:" + "|".join(SHELL_COMMANDS) + r")(?:\s|$)"
)


def split_statements(text: str) -> list[tuple[int, str]]:
    """Split a script into (offset, text) chunks.

    A statement ends at ``;`` or a blank line (outside quotes), or where the
    next line opens with a statement keyword or a shell command.
    """
    chunks: list[tuple[int, str]] = []
    start = 0
    i = 0
    quote_char = None
    n = len(text)

    def flush(end: int) -> None:
        chunk = text[start:end]
        if _strip_comments(chunk).strip():
            chunks.append((start, chunk))

    while i < n:
        c = text[i]
        if quote_char:
            if c == "\\":
                i += 2
                continue
            if c == quote_char:
                quote_char = None
        elif c in "'\"":
            quote_char = c
        elif c == "`":
            quote_char = "'"
        elif c == "#" and (i == 0 or text[i - 1].isspace()):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        elif c == ";":
            flush(i)
            start = i + 1
        elif c == "\n":
            j = i + 1
            while j < n and text[j] in " \t\r":
                j += 1
            if j < n and text[j] == "\n":
                flush(i)
                start = j
                i = j
                continue
            if text[start:i].lstrip().startswith("\\") or _STATEMENT_START.match(text, j):
                flush(i)
                start = i + 1
        i += 1
    flush(n)
    return chunks


def _strip_comments(text: str) -> str:
    return re.sub(r"(^|\s)#[^\n]*", r"\1", text)
