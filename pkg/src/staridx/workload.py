"""Workload ingestion: a restricted SQL subset parsed into analytical queries.

Supported grammar (case-insensitive keywords)::

    statement   := SELECT select_list FROM table_list [WHERE conjunction]
                   [GROUP BY attr_list] [ORDER BY order_list]
    select_list := select_item ("," select_item)*
    select_item := "*" | AGG "(" attr ")" | "COUNT" "(" "*" ")" | attr
    table_list  := table_ref ("," table_ref)*
    table_ref   := NAME [AS] [NAME]
    conjunction := predicate (AND predicate)*
    predicate   := attr "=" literal
                 | attr "=" attr          -- must match a registered join key
                 | attr IN "(" literal ("," literal)* ")"
                 | attr BETWEEN literal AND literal
    attr        := NAME ["." NAME]
    literal     := NUMBER | STRING

AGG is one of SUM, AVG, MIN, MAX, COUNT and must wrap a fact-table attribute
(COUNT(*) is accepted and records no measure).  The fact table must appear in
FROM.  Join equalities are recognised through the schema's join_keys and
populate joined_dimensions; they never become restrictions.  Value predicates
and GROUP BY entries must target dimension attributes of joined dimensions;
anything else is rejected rather than silently dropped.  Plain SELECT-list
attributes and the ORDER BY clause carry no indexing signal and are ignored.

Everything outside the grammar (subqueries, OR, NOT, HAVING, explicit JOIN
syntax, other comparison operators) raises a structured error naming the
offending token; load_workload skips and counts such statements.

A line comment of the form ``-- weight: n`` immediately before a statement
sets that statement's weight (default 1).
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable

from .schema import AttrId, SchemaError, StarSchema

log = logging.getLogger(__name__)

EQUALITY = "equality"
IN_LIST = "in_list"
BETWEEN = "between"

_AGGREGATES = {"SUM", "AVG", "MIN", "MAX", "COUNT"}
_RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "HAVING", "AND", "OR",
    "NOT", "IN", "BETWEEN", "AS", "JOIN", "ON", "INNER", "LEFT", "RIGHT",
    "FULL", "OUTER", "CROSS", "UNION", "ASC", "DESC", "LIKE",
}


class QueryParseError(ValueError):
    """A statement could not be turned into an AnalyticalQuery.

    Carries the offending token text and its character offset when known.
    """

    def __init__(self, message: str, token: str | None = None, position: int | None = None):
        super().__init__(message)
        self.token = token
        self.position = position


class UnsupportedConstructError(QueryParseError):
    """Statement is valid-looking SQL but outside the supported subset."""


class ResolutionError(QueryParseError):
    """A table or attribute reference could not be resolved."""


@dataclass(frozen=True)
class RestrictionPredicate:
    """One conjunct of the WHERE clause restricting a dimension attribute.

    value_count is the number of attribute values admitted by the predicate:
    1 for an equality, the literal-list length for IN.  For BETWEEN the stored
    count is 1 and the cost model substitutes its between_fraction estimate.
    """

    attribute: AttrId
    kind: str
    value_count: int = 1

    def __post_init__(self):
        if self.kind not in (EQUALITY, IN_LIST, BETWEEN):
            raise ValueError(f"unknown predicate kind '{self.kind}'")
        if self.value_count < 1:
            raise ValueError("value_count must be >= 1")


@dataclass(frozen=True)
class AnalyticalQuery:
    id: str
    grouping: frozenset[AttrId]
    measures: tuple[tuple[str, AttrId], ...]
    restrictions: tuple[RestrictionPredicate, ...]
    joined_dimensions: frozenset[str]
    weight: int = 1

    def __post_init__(self):
        if self.weight < 1:
            raise ValueError("query weight must be >= 1")
        for a in self.grouping:
            if a.table not in self.joined_dimensions:
                raise ValueError(f"grouping attribute {a} outside joined dimensions")
        for r in self.restrictions:
            if r.attribute.table not in self.joined_dimensions:
                raise ValueError(f"restriction attribute {r.attribute} outside joined dimensions")


@dataclass(frozen=True)
class WorkloadBatch:
    queries: tuple[AnalyticalQuery, ...]
    skipped: int = 0
    source: str = "<memory>"

    def __post_init__(self):
        ids = [q.id for q in self.queries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[0]
            raise ValueError(f"duplicate query id '{dup}' in batch")

    def total_weight(self) -> int:
        return sum(q.weight for q in self.queries)


def extract_indexable(query: AnalyticalQuery) -> frozenset[AttrId]:
    """Attributes of the query an index could serve: grouping plus restricted."""
    return query.grouping | frozenset(r.attribute for r in query.restrictions)


# -- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>--[^\n]*)
    | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
    | (?P<string>'(?:[^']|'')*')
    | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<op><=|>=|<>|!=|=|<|>)
    | (?P<punct>[(),.*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | string | name | op | punct | end
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper()


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise QueryParseError(
                f"unexpected character {text[i]!r}", token=text[i], position=i
            )
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), i))
        i = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# -- statement splitting ----------------------------------------------------

_WEIGHT_RE = re.compile(r"^\s*weight\s*:\s*([1-9][0-9]*)\s*$")


def split_statements(text: str) -> list[tuple[str, int]]:
    """Split a workload file into (statement text, weight) pairs.

    Statements end at ';' outside string literals.  Line comments are removed
    here so a ';' inside one cannot split a statement; a ``-- weight: n``
    comment sets the weight of the next statement.
    """
    out: list[tuple[str, int]] = []
    buf: list[str] = []
    pending_weight = 1

    def flush():
        nonlocal pending_weight
        stmt = "".join(buf).strip()
        buf.clear()
        if stmt:
            out.append((stmt, pending_weight))
            pending_weight = 1

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "'":  # string literal, '' is an escaped quote
            j = i + 1
            while j < n:
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        j += 2
                        continue
                    break
                j += 1
            buf.append(text[i : j + 1])
            i = j + 1
        elif ch == "-" and text.startswith("--", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            m = _WEIGHT_RE.match(text[i + 2 : j])
            if m and not "".join(buf).strip():
                pending_weight = int(m.group(1))
            i = j
        elif ch == ";":
            flush()
            i += 1
        else:
            buf.append(ch)
            i += 1
    flush()
    return out


# -- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], schema: StarSchema):
        self.tokens = tokens
        self.schema = schema
        self.i = 0
        # binding name (alias or table name) -> canonical table name
        self.bindings: dict[str, str] = {}
        self.grouping: set[AttrId] = set()
        self.measures: list[tuple[str, AttrId]] = []
        self.restrictions: list[RestrictionPredicate] = []
        self.joined: set[str] = set()

    # token plumbing

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "name" and tok.upper in words

    def expect_keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind != "name" or tok.upper != word:
            raise QueryParseError(
                f"expected {word}, found {tok.text!r}", token=tok.text, position=tok.pos
            )
        return self.advance()

    def expect_punct(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            raise QueryParseError(
                f"expected '{text}', found {tok.text!r}", token=tok.text, position=tok.pos
            )
        return self.advance()

    def expect_name(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != "name" or tok.upper in _RESERVED:
            raise QueryParseError(
                f"expected {what}, found {tok.text!r}", token=tok.text, position=tok.pos
            )
        return self.advance()

    # prescan for constructs outside the subset, so the error names them

    def prescan(self):
        for tok in self.tokens[1:]:
            if tok.kind == "name" and tok.upper == "SELECT":
                raise UnsupportedConstructError(
                    "subqueries are not supported", token=tok.text, position=tok.pos
                )
        for tok in self.tokens:
            if tok.kind != "name":
                continue
            if tok.upper == "OR":
                raise UnsupportedConstructError(
                    "OR is not supported; WHERE must be a conjunction",
                    token=tok.text, position=tok.pos,
                )
            if tok.upper == "NOT":
                raise UnsupportedConstructError(
                    "NOT is not supported", token=tok.text, position=tok.pos
                )
            if tok.upper == "HAVING":
                raise UnsupportedConstructError(
                    "HAVING is not supported", token=tok.text, position=tok.pos
                )
            if tok.upper in ("JOIN", "OUTER", "INNER", "CROSS", "UNION"):
                raise UnsupportedConstructError(
                    f"{tok.upper} syntax is not supported; use comma joins",
                    token=tok.text, position=tok.pos,
                )

    # grammar productions

    def _find_from(self) -> int:
        depth = 0
        for idx in range(self.i, len(self.tokens)):
            tok = self.tokens[idx]
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            elif depth == 0 and tok.kind == "name" and tok.upper == "FROM":
                return idx
        end = self.tokens[-1]
        raise QueryParseError("expected FROM clause", token=end.text, position=end.pos)

    def parse(self):
        self.prescan()
        self.expect_keyword("SELECT")
        # select items resolve against FROM bindings, so the table list is
        # parsed first, then the cursor rewinds to the select list
        select_start = self.i
        from_at = self._find_from()
        self.i = from_at + 1
        self.table_list()
        after_tables = self.i
        self.i = select_start
        self.select_list()
        if self.i != from_at:
            tok = self.peek()
            raise QueryParseError(
                f"unexpected token {tok.text!r} in select list",
                token=tok.text, position=tok.pos,
            )
        self.i = after_tables
        if self.at_keyword("WHERE"):
            self.advance()
            self.conjunction()
        if self.at_keyword("GROUP"):
            self.advance()
            self.expect_keyword("BY")
            self.group_list()
        if self.at_keyword("ORDER"):
            self.advance()
            self.expect_keyword("BY")
            self.order_list()
        tok = self.peek()
        if tok.kind != "end":
            raise QueryParseError(
                f"unexpected trailing token {tok.text!r}", token=tok.text, position=tok.pos
            )
        self.finish_checks()

    def select_list(self):
        while True:
            self.select_item()
            if self.peek().text == ",":
                self.advance()
                continue
            break

    def select_item(self):
        tok = self.peek()
        if tok.text == "*":
            self.advance()  # project-all carries no indexing signal
            return
        if tok.kind == "name" and tok.upper in _AGGREGATES and self.tokens[self.i + 1].text == "(":
            func = self.advance().upper
            self.expect_punct("(")
            if self.peek().text == "*":
                star = self.advance()
                if func != "COUNT":
                    raise UnsupportedConstructError(
                        f"{func}(*) is not supported", token=star.text, position=star.pos
                    )
                self.expect_punct(")")
                return  # COUNT(*) aggregates rows, not an attribute
            ref_tok = self.peek()
            attr = self.attr_ref()
            self.expect_punct(")")
            if attr.table != self.schema.fact.name:
                raise UnsupportedConstructError(
                    f"aggregate over non-fact attribute {attr}",
                    token=ref_tok.text, position=ref_tok.pos,
                )
            self.measures.append((func, attr))
            return
        # plain projected attribute: resolve for validity, then ignore
        self.attr_ref()

    def table_list(self):
        while True:
            name_tok = self.expect_name("table name")
            try:
                table = self.schema.table(name_tok.text)
            except SchemaError:
                raise ResolutionError(
                    f"unknown table '{name_tok.text}'",
                    token=name_tok.text, position=name_tok.pos,
                ) from None
            binding = name_tok.text
            if self.at_keyword("AS"):
                self.advance()
                binding = self.expect_name("table alias").text
            elif self.peek().kind == "name" and self.peek().upper not in _RESERVED:
                binding = self.advance().text
            if binding in self.bindings:
                raise ResolutionError(f"duplicate table binding '{binding}'")
            self.bindings[binding] = table.name
            if self.peek().text == ",":
                self.advance()
                continue
            break

    def attr_ref(self) -> AttrId:
        first = self.expect_name("attribute reference")
        if self.peek().text == ".":
            self.advance()
            second = self.expect_name("attribute name")
            table = self.bindings.get(first.text)
            if table is None:
                raise ResolutionError(
                    f"unknown table or alias '{first.text}'",
                    token=first.text, position=first.pos,
                )
            attr = AttrId(table, second.text)
            if not self.schema.table(table).has_attribute(second.text):
                raise ResolutionError(
                    f"unknown attribute {attr}", token=second.text, position=second.pos
                )
            return attr
        # bare attribute: resolve across FROM bindings
        hits = [
            AttrId(table, first.text)
            for table in dict.fromkeys(self.bindings.values())
            if self.schema.table(table).has_attribute(first.text)
        ]
        if not hits:
            raise ResolutionError(
                f"unknown attribute '{first.text}'", token=first.text, position=first.pos
            )
        if len(hits) > 1:
            raise ResolutionError(
                f"ambiguous attribute '{first.text}' ({', '.join(map(str, hits))})",
                token=first.text, position=first.pos,
            )
        return hits[0]

    def conjunction(self):
        while True:
            self.predicate()
            if self.at_keyword("AND"):
                self.advance()
                continue
            break

    def predicate(self):
        tok = self.peek()
        if tok.text == "(":
            raise UnsupportedConstructError(
                "parenthesised predicates are not supported",
                token=tok.text, position=tok.pos,
            )
        left_tok = tok
        left = self.attr_ref()
        op = self.peek()
        if op.kind == "op":
            if op.text != "=":
                raise UnsupportedConstructError(
                    f"operator '{op.text}' is not supported",
                    token=op.text, position=op.pos,
                )
            self.advance()
            rhs = self.peek()
            if rhs.kind in ("number", "string"):
                self.advance()
                self.value_restriction(left, left_tok, EQUALITY, 1)
                return
            right = self.attr_ref()
            self.join_equality(left, right, left_tok)
            return
        if self.at_keyword("IN"):
            self.advance()
            self.expect_punct("(")
            count = 0
            while True:
                lit = self.peek()
                if lit.kind not in ("number", "string"):
                    raise QueryParseError(
                        f"expected literal in IN list, found {lit.text!r}",
                        token=lit.text, position=lit.pos,
                    )
                self.advance()
                count += 1
                if self.peek().text == ",":
                    self.advance()
                    continue
                break
            self.expect_punct(")")
            self.value_restriction(left, left_tok, IN_LIST, count)
            return
        if self.at_keyword("BETWEEN"):
            self.advance()
            for part in ("low", "high"):
                lit = self.peek()
                if lit.kind not in ("number", "string"):
                    raise QueryParseError(
                        f"expected {part} literal in BETWEEN, found {lit.text!r}",
                        token=lit.text, position=lit.pos,
                    )
                self.advance()
                if part == "low":
                    self.expect_keyword("AND")
            self.value_restriction(left, left_tok, BETWEEN, 1)
            return
        raise QueryParseError(
            f"expected predicate operator, found {op.text!r}",
            token=op.text, position=op.pos,
        )

    def value_restriction(self, attr: AttrId, tok: _Token, kind: str, count: int):
        if attr.table == self.schema.fact.name:
            raise UnsupportedConstructError(
                f"restriction on fact attribute {attr} is outside the star-join model",
                token=tok.text, position=tok.pos,
            )
        self.restrictions.append(RestrictionPredicate(attr, kind, count))

    def join_equality(self, left: AttrId, right: AttrId, tok: _Token):
        fact = self.schema.fact.name
        for fk_side, dim_side in ((left, right), (right, left)):
            if fk_side.table == fact:
                dim = self.schema.joined_dimension_for(fk_side.attribute, dim_side)
                if dim is not None:
                    self.joined.add(dim)
                    return
        raise UnsupportedConstructError(
            f"equality {left} = {right} does not match a registered join key",
            token=tok.text, position=tok.pos,
        )

    def group_list(self):
        while True:
            tok = self.peek()
            attr = self.attr_ref()
            if attr.table == self.schema.fact.name:
                raise UnsupportedConstructError(
                    f"grouping on fact attribute {attr} is outside the star-join model",
                    token=tok.text, position=tok.pos,
                )
            self.grouping.add(attr)
            if self.peek().text == ",":
                self.advance()
                continue
            break

    def order_list(self):
        # ORDER BY is parsed for well-formedness and otherwise ignored
        while True:
            self.attr_ref()
            if self.at_keyword("ASC", "DESC"):
                self.advance()
            if self.peek().text == ",":
                self.advance()
                continue
            break

    def finish_checks(self):
        if self.schema.fact.name not in self.bindings.values():
            raise UnsupportedConstructError(
                f"fact table '{self.schema.fact.name}' is not referenced in FROM"
            )
        for attr in sorted(self.grouping) + sorted(r.attribute for r in self.restrictions):
            if attr.table not in self.joined:
                raise UnsupportedConstructError(
                    f"dimension '{attr.table}' is used but not joined to the fact table"
                )


def _content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]


def parse_query(
    text: str, schema: StarSchema, position: int = 0, weight: int = 1
) -> AnalyticalQuery:
    """Parse one statement into an AnalyticalQuery.

    Parsing is deterministic: identical text yields an identical query, with
    the id derived from the batch position and a content hash.
    """
    stripped = text.strip().rstrip(";").strip()
    parser = _Parser(_tokenize(stripped), schema)
    parser.parse()
    return AnalyticalQuery(
        id=f"q{position:04d}-{_content_hash(stripped)}",
        grouping=frozenset(parser.grouping),
        measures=tuple(parser.measures),
        restrictions=tuple(parser.restrictions),
        joined_dimensions=frozenset(parser.joined),
        weight=weight,
    )


def parse_workload(text: str, schema: StarSchema, source: str = "<memory>") -> WorkloadBatch:
    """Parse a workload text: statements split on ';', failures skipped and counted."""
    queries: list[AnalyticalQuery] = []
    skipped = 0
    for stmt, weight in split_statements(text):
        try:
            queries.append(parse_query(stmt, schema, position=len(queries), weight=weight))
        except QueryParseError as exc:
            skipped += 1
            log.info("skipping unparseable statement in %s: %s", source, exc)
    return WorkloadBatch(tuple(queries), skipped=skipped, source=source)


def load_workload(path: str, schema: StarSchema) -> WorkloadBatch:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_workload(fh.read(), schema, source=path)


def with_id_prefix(batch: WorkloadBatch, prefix: str) -> WorkloadBatch:
    """Copy a batch with every query id prefixed.

    Callers that feed successive batches into one accumulated context use this
    to namespace ids per ingestion cycle, so re-ingesting identical text never
    collides with transactions already present.
    """
    queries = tuple(
        AnalyticalQuery(
            id=prefix + q.id,
            grouping=q.grouping,
            measures=q.measures,
            restrictions=q.restrictions,
            joined_dimensions=q.joined_dimensions,
            weight=q.weight,
        )
        for q in batch.queries
    )
    return WorkloadBatch(queries, skipped=batch.skipped, source=batch.source)


# -- serialization (used by the advisor state file) -------------------------


def query_to_dict(q: AnalyticalQuery) -> dict:
    return {
        "id": q.id,
        "grouping": sorted([a.table, a.attribute] for a in q.grouping),
        "measures": [[func, [a.table, a.attribute]] for func, a in q.measures],
        "restrictions": [
            {
                "attribute": [r.attribute.table, r.attribute.attribute],
                "kind": r.kind,
                "value_count": r.value_count,
            }
            for r in q.restrictions
        ],
        "joined_dimensions": sorted(q.joined_dimensions),
        "weight": q.weight,
    }


def query_from_dict(doc: dict) -> AnalyticalQuery:
    return AnalyticalQuery(
        id=doc["id"],
        grouping=frozenset(AttrId(t, a) for t, a in doc["grouping"]),
        measures=tuple((func, AttrId(t, a)) for func, (t, a) in doc["measures"]),
        restrictions=tuple(
            RestrictionPredicate(
                AttrId(*r["attribute"]), r["kind"], r["value_count"]
            )
            for r in doc["restrictions"]
        ),
        joined_dimensions=frozenset(doc["joined_dimensions"]),
        weight=doc["weight"],
    )
