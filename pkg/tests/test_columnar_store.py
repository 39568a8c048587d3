"""Tests for dictionary encoding, column packing and CSV ingestion."""

from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pim_olap_sim.models.errors import IngestError, SchemaError, ValidationFailure
from pim_olap_sim.models.schema import ColumnDef, LogicalType, Schema, TableDef
from pim_olap_sim.services.columnar_store import (
    EPOCH,
    build_database,
    build_dictionary,
    build_table,
    coerce_literal,
    column_codes,
    column_values,
    decode_column,
    dictionary_width,
    encode_column,
    encode_values,
    load_csv,
    min_width,
    parse_cell,
    raw_bytes,
)

INT = ColumnDef(name="qty", type=LogicalType.INT)
PRICE = ColumnDef(name="price", type=LogicalType.DECIMAL, scale=2)
DAY = ColumnDef(name="day", type=LogicalType.DATE)
NAME = ColumnDef(name="name", type=LogicalType.STRING)

ORDERS = TableDef(
    name="orders",
    columns=[ColumnDef(name="id", type=LogicalType.INT), PRICE, DAY, NAME],
    primary_key=["id"],
)
ORDERS_SCHEMA = Schema(name="shop", fact_table="orders", tables=[ORDERS])


# Generator for text values including non-ASCII
def text_strategy():
    """Generate short strings over a mixed alphabet."""
    return st.text(alphabet="abcXYZ019 éß", max_size=6)


@given(st.lists(st.integers(min_value=-(1 << 40), max_value=1 << 40), min_size=1, max_size=200))
def test_dictionary_preserves_integer_order(values):
    """Codes compare exactly as the values they replace."""
    dictionary = build_dictionary(values)
    codes = encode_column(values, dictionary)

    for a, b, ca, cb in zip(values, values[1:], codes, codes[1:]):
        assert (a < b) == (ca < cb)
        assert (a == b) == (ca == cb)
    assert decode_column(codes, dictionary).tolist() == values


@given(st.lists(text_strategy(), min_size=1, max_size=100))
def test_dictionary_preserves_string_order(values):
    """String codes follow lexicographic order."""
    encoded = encode_values(NAME, values)
    codes = column_codes(encoded)

    for a, b, ca, cb in zip(values, values[1:], codes, codes[1:]):
        assert (a < b) == (ca < cb)
    assert column_values(encoded).tolist() == values
    assert encoded.width == dictionary_width(encoded.dictionary)


@pytest.mark.parametrize(
    "value, width",
    [(0, 2), (3, 2), (4, 4), (255, 8), (256, 16), (65_536, 32), ((1 << 64) - 1, 64)],
)
def test_min_width(value, width):
    assert min_width(value) == width


def test_min_width_out_of_range():
    with pytest.raises(ValidationFailure):
        min_width(-1)
    with pytest.raises(ValidationFailure):
        min_width(1 << 64)


class TestEncodeValues:
    """Per-column encoding choices."""

    def test_key_columns_store_values_directly(self):
        encoded = encode_values(ColumnDef(name="id", type=LogicalType.INT), [5, 100, 7], is_key=True)

        assert encoded.dictionary is None
        assert encoded.is_key
        assert encoded.width == 8
        assert column_codes(encoded).tolist() == [5, 100, 7]

    def test_negative_key_rejected(self):
        with pytest.raises(ValidationFailure):
            encode_values(ColumnDef(name="id", type=LogicalType.INT), [1, -2], is_key=True)

    def test_sparse_large_values_use_dictionary(self):
        encoded = encode_values(INT, [2_000_000, 1_000_000, 2_000_000])

        assert encoded.dictionary is not None
        assert encoded.width == 2
        assert column_codes(encoded).tolist() == [1, 0, 1]
        assert column_values(encoded).tolist() == [2_000_000, 1_000_000, 2_000_000]

    def test_dense_small_values_stay_direct(self):
        encoded = encode_values(INT, [0, 1, 2, 3])

        assert encoded.dictionary is None
        assert column_values(encoded).tolist() == [0, 1, 2, 3]

    def test_negative_values_use_dictionary(self):
        encoded = encode_values(PRICE, [-150, 20, -150])

        assert encoded.dictionary is not None
        assert column_values(encoded).tolist() == [-150, 20, -150]

    def test_values_at_selected_rows(self):
        encoded = encode_values(NAME, ["pear", "apple", "fig", "apple"])

        assert column_values(encoded, np.array([3, 0])).tolist() == ["apple", "pear"]

    def test_empty_column(self):
        encoded = encode_values(INT, [])
        assert encoded.packed.length == 0
        assert column_values(encoded).tolist() == []


class TestDictionaryErrors:
    """Lookups outside the dictionary."""

    def test_missing_value(self):
        dictionary = build_dictionary([1, 3, 5])
        with pytest.raises(ValidationFailure, match="not in the dictionary"):
            encode_column([3, 4], dictionary)

    def test_code_out_of_range(self):
        dictionary = build_dictionary(["a", "b"])
        with pytest.raises(ValidationFailure):
            decode_column(np.array([0, 2]), dictionary)


class TestLiterals:
    """CSV cells and query literals in the logical value domain."""

    def test_decimal_literals_are_scaled(self):
        assert coerce_literal(0.05, PRICE) == 5
        assert coerce_literal("12.34", PRICE) == 1234
        assert parse_cell("12.34", PRICE) == 1234
        assert coerce_literal(25, ColumnDef(name="q", type=LogicalType.DECIMAL, scale=2)) == 2500

    def test_dates_are_epoch_days(self):
        assert parse_cell("1970-01-02", DAY) == 1
        assert coerce_literal("1994-01-01", DAY) == (date(1994, 1, 1) - EPOCH).days
        assert coerce_literal(9000, DAY) == 9000

    def test_other_literals(self):
        assert coerce_literal("3", INT) == 3
        assert coerce_literal(5, NAME) == "5"
        assert parse_cell("  42 ", INT) == 42
        assert parse_cell(" spaced ", NAME) == " spaced "


class TestBuildDatabase:
    """Whole-table construction."""

    @pytest.fixture
    def data(self):
        return {
            "orders": {
                "id": [1, 2, 3],
                "price": [1999, 500, 1999],
                "day": [0, 1, 2],
                "name": ["ab", "ü", "ab"],
            }
        }

    def test_build_and_size(self, data):
        db = build_database(ORDERS_SCHEMA, data)

        assert db.row_counts() == {"orders": 3}
        assert raw_bytes(db) == 3 * 8 * 3 + (2 + 2 + 2)
        assert db.encoded_bytes() > 0

    def test_missing_column(self, data):
        del data["orders"]["day"]
        with pytest.raises(SchemaError, match="missing columns"):
            build_table(ORDERS, data["orders"])

    def test_ragged_columns(self, data):
        data["orders"]["day"] = [0, 1]
        with pytest.raises(SchemaError, match="different lengths"):
            build_table(ORDERS, data["orders"])

    def test_missing_table(self):
        with pytest.raises(SchemaError):
            build_database(ORDERS_SCHEMA, {})


class TestLoadCsv:
    """CSV ingestion."""

    HEADER = "id,price,day,name\n"

    def test_load_single_file(self, tmp_path):
        path = tmp_path / "orders.csv"
        path.write_text(self.HEADER + "1,19.99,1994-01-01,widget\n2,5.00,1994-01-02,gadget\n", encoding="utf-8")

        db = load_csv(path, ORDERS_SCHEMA)
        price = db.table("orders").columns["price"]

        assert db.row_counts() == {"orders": 2}
        assert column_values(price).tolist() == [1999, 500]

    def test_load_directory(self, tmp_path):
        (tmp_path / "orders.csv").write_text(self.HEADER + "7,1.00,2000-02-29,x\n", encoding="utf-8")

        db = load_csv(tmp_path, ORDERS_SCHEMA)

        assert column_values(db.table("orders").columns["day"]).tolist() == [(date(2000, 2, 29) - EPOCH).days]

    def test_bad_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "orders.csv"
        path.write_text(self.HEADER + "1,1.00,1994-01-01,a\n2,abc,1994-01-01,b\n", encoding="utf-8")

        with pytest.raises(IngestError) as exc_info:
            load_csv(path, ORDERS_SCHEMA)

        assert exc_info.value.row == 2
        assert exc_info.value.column == "price"
        assert exc_info.value.code == "ingest_error"

    def test_short_row(self, tmp_path):
        path = tmp_path / "orders.csv"
        path.write_text(self.HEADER + "1,1.00\n", encoding="utf-8")

        with pytest.raises(IngestError) as exc_info:
            load_csv(path, ORDERS_SCHEMA)
        assert exc_info.value.row == 1

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "orders.csv"
        path.write_text("id,cost,day,name\n", encoding="utf-8")

        with pytest.raises(SchemaError):
            load_csv(path, ORDERS_SCHEMA)
