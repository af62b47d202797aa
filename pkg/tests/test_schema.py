import json

import pytest
from hypothesis import given, strategies as st

from staridx.schema import (
    AttrId,
    AttributeStats,
    SchemaError,
    StarSchema,
    TableStats,
    dump_schema,
    load_schema,
    load_schema_dict,
    page_count,
    schema_to_dict,
)


def demo_doc():
    return {
        "page_size": 8192,
        "fact": {
            "name": "sales",
            "row_count": 100000,
            "row_width": 100,
            "attributes": [
                {"name": "amount", "distinct_values": 5000},
                {"name": "cust_id", "distinct_values": 1000},
            ],
            "join_keys": [{"fact_attribute": "cust_id", "dimension": "customer"}],
        },
        "dimensions": [
            {
                "name": "customer",
                "row_count": 1000,
                "row_width": 200,
                "primary_key": "id",
                "attributes": [
                    {"name": "id", "distinct_values": 1000},
                    {"name": "city", "distinct_values": 50},
                ],
            }
        ],
    }


def test_page_count_known_values():
    # ceil(100000 * 100 / 8192) and ceil(1000 * 200 / 8192), integer exact
    assert page_count(TableStats("f", 100000, 100, ()), 8192) == 1221
    assert page_count(TableStats("d", 1000, 200, ()), 8192) == 25
    assert page_count(TableStats("e", 0, 100, ()), 8192) == 0
    assert page_count(TableStats("x", 1, 1, ()), 8192) == 1


@given(rows=st.integers(0, 10**9), width=st.integers(1, 4096), page=st.integers(1, 65536))
def test_page_count_is_exact_ceiling(rows, width, page):
    t = TableStats("t", rows, width, ())
    got = page_count(t, page)
    assert got * page >= rows * width
    assert (got - 1) * page < rows * width or got == 0


def test_load_and_lookups():
    s = load_schema_dict(demo_doc())
    assert s.fact.name == "sales"
    assert s.is_dimension("customer") and not s.is_dimension("sales")
    assert s.attribute_stats(AttrId("customer", "city")).distinct_values == 50
    assert s.join_key_for_dimension("customer") == ("cust_id", "id")
    assert s.joined_dimension_for("cust_id", AttrId("customer", "id")) == "customer"
    assert s.joined_dimension_for("cust_id", AttrId("customer", "city")) is None
    assert AttrId("customer", "city") in s.dimension_attributes()
    assert AttrId("sales", "amount") not in s.dimension_attributes()


def test_round_trip_identity(tmp_path):
    s = load_schema_dict(demo_doc())
    path = tmp_path / "schema.json"
    dump_schema(s, str(path))
    assert load_schema(str(path)) == s
    assert load_schema_dict(schema_to_dict(s)) == s


def test_unknown_key_rejected_by_name():
    doc = demo_doc()
    doc["fact"]["fillfactor"] = 70
    with pytest.raises(SchemaError, match="fillfactor"):
        load_schema_dict(doc)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["dimensions"].append(d["dimensions"][0]), "duplicate table"),
        (lambda d: d["dimensions"][0].pop("primary_key"), "primary_key"),
        (
            lambda d: d["fact"]["join_keys"].append(
                {"fact_attribute": "amount", "dimension": "nowhere"}
            ),
            "unknown dimension",
        ),
        (
            lambda d: d["fact"]["attributes"].append(
                {"name": "amount", "distinct_values": 1}
            ),
            "duplicate attribute",
        ),
        (
            lambda d: d["dimensions"][0]["attributes"][0].update(distinct_values=0),
            "distinct_values",
        ),
        (lambda d: d["fact"].update(row_width=0), "row_width"),
        (lambda d: d["fact"].update(row_count=-1), "row_count"),
    ],
)
def test_structural_validation(mutate, message):
    doc = demo_doc()
    mutate(doc)
    with pytest.raises(SchemaError, match=message):
        load_schema_dict(doc)


def test_malformed_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="malformed JSON"):
        load_schema(str(path))


def test_attr_id_renders_dotted():
    assert str(AttrId("customer", "city")) == "customer.city"
    # tuple ordering gives a stable global sort for attribute lists
    assert AttrId("a", "z") < AttrId("b", "a")


def test_table_lookup_errors():
    s = load_schema_dict(demo_doc())
    with pytest.raises(SchemaError, match="unknown table"):
        s.table("void")
    with pytest.raises(SchemaError, match="fact table, not a dimension"):
        s.dimension("sales")
    with pytest.raises(SchemaError, match="no join key"):
        StarSchema(s.fact, s.dimensions, {}, 8192).join_key_for_dimension("customer")
