"""Star-schema catalog: table statistics, join topology, page arithmetic.

The schema file is a single JSON document::

    {
      "page_size": 8192,
      "fact": {
        "name": "sales", "row_count": 100000, "row_width": 100,
        "attributes": [{"name": "amount", "distinct_values": 5000}, ...],
        "join_keys": [{"fact_attribute": "cust_id", "dimension": "customer"}]
      },
      "dimensions": [
        {"name": "customer", "row_count": 1000, "row_width": 200,
         "primary_key": "id",
         "attributes": [{"name": "id", "distinct_values": 1000},
                        {"name": "city", "distinct_values": 50}]}
      ]
    }

Unknown keys anywhere in the document are rejected by name.  Attributes are
identified everywhere in the package by (table, attribute) pairs so that
same-named columns on different tables never collide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple


class SchemaError(ValueError):
    """Schema file failed to parse or violates a structural invariant."""


class AttrId(NamedTuple):
    """Canonical attribute identity: (table name, attribute name)."""

    table: str
    attribute: str

    def __str__(self) -> str:
        return f"{self.table}.{self.attribute}"


@dataclass(frozen=True)
class AttributeStats:
    name: str
    distinct_values: int


@dataclass(frozen=True)
class TableStats:
    name: str
    row_count: int
    row_width: int
    attributes: tuple[AttributeStats, ...]
    primary_key: str | None = None

    def attribute(self, name: str) -> AttributeStats:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"table '{self.name}' has no attribute '{name}'")

    def has_attribute(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)


@dataclass(frozen=True, eq=True)
class StarSchema:
    """One fact table, its dimensions, and the fact-to-dimension join keys.

    join_keys maps a fact foreign-key attribute name to the pair
    (dimension name, dimension primary-key attribute name).
    """

    fact: TableStats
    dimensions: tuple[TableStats, ...]
    join_keys: Mapping[str, tuple[str, str]]
    page_size: int = 8192
    _tables: Mapping[str, TableStats] = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "_tables", {d.name: d for d in self.dimensions} | {self.fact.name: self.fact}
        )

    # -- lookups ---------------------------------------------------------

    def table(self, name: str) -> TableStats:
        try:
            return self._tables[name]
        except KeyError:
            raise SchemaError(f"unknown table '{name}'") from None

    def is_dimension(self, name: str) -> bool:
        return name != self.fact.name and name in self._tables

    def dimension(self, name: str) -> TableStats:
        t = self.table(name)
        if t.name == self.fact.name:
            raise SchemaError(f"'{name}' is the fact table, not a dimension")
        return t

    def attribute_stats(self, attr: AttrId) -> AttributeStats:
        return self.table(attr.table).attribute(attr.attribute)

    def dimension_attributes(self) -> frozenset[AttrId]:
        return frozenset(
            AttrId(d.name, a.name) for d in self.dimensions for a in d.attributes
        )

    def joined_dimension_for(self, fact_attr: str, dim_attr: AttrId) -> str | None:
        """Dimension joined by the equality fact.fact_attr = dim_attr, if any."""
        entry = self.join_keys.get(fact_attr)
        if entry is not None and entry == (dim_attr.table, dim_attr.attribute):
            return entry[0]
        return None

    def join_key_for_dimension(self, dimension: str) -> tuple[str, str]:
        """Return (fact fk attribute, dimension pk attribute) for a dimension."""
        for fk, (dim, pk) in sorted(self.join_keys.items()):
            if dim == dimension:
                return fk, pk
        raise SchemaError(f"dimension '{dimension}' has no join key to '{self.fact.name}'")


def page_count(table: TableStats, page_size: int) -> int:
    """Pages occupied by a full scan: ceil(row_count * row_width / page_size).

    Exact integer arithmetic; 0 exactly when the table is empty.
    """
    if page_size < 1:
        raise SchemaError(f"page_size must be >= 1, got {page_size}")
    return -(-table.row_count * table.row_width // page_size)


# -- JSON loading --------------------------------------------------------

_ATTR_KEYS = {"name", "distinct_values"}
_FACT_KEYS = {"name", "row_count", "row_width", "attributes", "join_keys"}
_DIM_KEYS = {"name", "row_count", "row_width", "attributes", "primary_key"}
_TOP_KEYS = {"page_size", "fact", "dimensions"}
_JOIN_KEYS = {"fact_attribute", "dimension"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"unknown key '{key}' in {where}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"missing key '{key}' in {where}")
    return obj[key]


def _load_attributes(raw, where: str) -> tuple[AttributeStats, ...]:
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"'attributes' of {where} must be a non-empty array")
    out = []
    seen = set()
    for i, a in enumerate(raw):
        if not isinstance(a, dict):
            raise SchemaError(f"attribute #{i} of {where} must be an object")
        _reject_unknown(a, _ATTR_KEYS, f"attribute #{i} of {where}")
        name = _require(a, "name", f"attribute #{i} of {where}")
        dv = _require(a, "distinct_values", f"attribute '{name}' of {where}")
        if not isinstance(name, str) or not name:
            raise SchemaError(f"attribute name in {where} must be a non-empty string")
        if name in seen:
            raise SchemaError(f"duplicate attribute '{name}' in {where}")
        seen.add(name)
        if not isinstance(dv, int) or isinstance(dv, bool) or dv < 1:
            raise SchemaError(
                f"distinct_values of '{name}' in {where} must be an integer >= 1"
            )
        out.append(AttributeStats(name, dv))
    return tuple(out)


def _load_table(raw: dict, where: str, keys: set[str], need_pk: bool) -> TableStats:
    _reject_unknown(raw, keys, where)
    name = _require(raw, "name", where)
    rows = _require(raw, "row_count", where)
    width = _require(raw, "row_width", where)
    if not isinstance(name, str) or not name:
        raise SchemaError(f"table name in {where} must be a non-empty string")
    if not isinstance(rows, int) or isinstance(rows, bool) or rows < 0:
        raise SchemaError(f"row_count of '{name}' must be an integer >= 0")
    if not isinstance(width, int) or isinstance(width, bool) or width < 1:
        raise SchemaError(f"row_width of '{name}' must be an integer >= 1")
    attrs = _load_attributes(_require(raw, "attributes", where), f"table '{name}'")
    pk = raw.get("primary_key")
    if need_pk:
        if not isinstance(pk, str):
            raise SchemaError(f"dimension '{name}' must declare a primary_key")
        if not any(a.name == pk for a in attrs):
            raise SchemaError(
                f"primary_key '{pk}' of dimension '{name}' is not among its attributes"
            )
    return TableStats(name, rows, width, attrs, pk)


def load_schema_dict(doc: dict) -> StarSchema:
    """Build and validate a StarSchema from an already-parsed JSON document."""
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "schema document")
    page_size = doc.get("page_size", 8192)
    if not isinstance(page_size, int) or isinstance(page_size, bool) or page_size < 1:
        raise SchemaError("page_size must be an integer >= 1")

    fact_raw = _require(doc, "fact", "schema document")
    if not isinstance(fact_raw, dict):
        raise SchemaError("'fact' must be an object")
    fact = _load_table(fact_raw, "fact table", _FACT_KEYS, need_pk=False)

    dims_raw = doc.get("dimensions", [])
    if not isinstance(dims_raw, list):
        raise SchemaError("'dimensions' must be an array")
    dims = []
    names = {fact.name}
    for i, d in enumerate(dims_raw):
        if not isinstance(d, dict):
            raise SchemaError(f"dimension #{i} must be an object")
        dim = _load_table(d, f"dimension #{i}", _DIM_KEYS, need_pk=True)
        if dim.name in names:
            raise SchemaError(f"duplicate table name '{dim.name}'")
        names.add(dim.name)
        dims.append(dim)
    by_name = {d.name: d for d in dims}

    join_keys: dict[str, tuple[str, str]] = {}
    for i, jk in enumerate(fact_raw.get("join_keys", [])):
        if not isinstance(jk, dict):
            raise SchemaError(f"join key #{i} must be an object")
        _reject_unknown(jk, _JOIN_KEYS, f"join key #{i}")
        fk = _require(jk, "fact_attribute", f"join key #{i}")
        dim_name = _require(jk, "dimension", f"join key #{i}")
        if not fact.has_attribute(fk):
            raise SchemaError(f"join key fact_attribute '{fk}' is not a fact attribute")
        if dim_name not in by_name:
            raise SchemaError(f"join key #{i} targets unknown dimension '{dim_name}'")
        if fk in join_keys:
            raise SchemaError(f"duplicate join key for fact attribute '{fk}'")
        join_keys[fk] = (dim_name, by_name[dim_name].primary_key)

    return StarSchema(fact, tuple(dims), join_keys, page_size)


def load_schema(path: str) -> StarSchema:
    """Parse and validate a schema file.  Raises SchemaError with diagnostics."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON in {path}: {exc}") from exc
    return load_schema_dict(doc)


def schema_to_dict(schema: StarSchema) -> dict:
    """Inverse of load_schema_dict; load_schema_dict(schema_to_dict(s)) == s."""

    def table(t: TableStats, with_pk: bool) -> dict:
        d = {
            "name": t.name,
            "row_count": t.row_count,
            "row_width": t.row_width,
            "attributes": [
                {"name": a.name, "distinct_values": a.distinct_values}
                for a in t.attributes
            ],
        }
        if with_pk:
            d["primary_key"] = t.primary_key
        return d

    fact = table(schema.fact, with_pk=False)
    fact["join_keys"] = [
        {"fact_attribute": fk, "dimension": dim}
        for fk, (dim, _pk) in sorted(schema.join_keys.items())
    ]
    return {
        "page_size": schema.page_size,
        "fact": fact,
        "dimensions": [table(d, with_pk=True) for d in schema.dimensions],
    }


def dump_schema(schema: StarSchema, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_dict(schema), fh, indent=2, sort_keys=True)
        fh.write("\n")
