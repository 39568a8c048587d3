"""Order-preserving dictionary encoding, bitpacking and database construction."""

import csv
import logging
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import IngestError, SchemaError, ValidationFailure
from pim_olap_sim.models.kernel import SUPPORTED_WIDTHS
from pim_olap_sim.models.schema import ColumnDef, LogicalType, Schema, TableDef
from pim_olap_sim.models.store import Database, Dictionary, EncodedColumn, Table
from pim_olap_sim.services.filter_kernel import pack_column, take_codes, unpack_column

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

EPOCH = date(1970, 1, 1)

RawColumn = Union[np.ndarray, Sequence[Any]]


def min_width(max_value: int) -> int:
    """Smallest supported width whose range covers ``max_value``."""
    if max_value < 0:
        raise ValidationFailure(f"max_value must be >= 0 (got {max_value})")
    for width in SUPPORTED_WIDTHS:
        if max_value < (1 << width):
            return width
    raise ValidationFailure(f"{max_value} does not fit in 64 bits")


def build_dictionary(values: RawColumn) -> Dictionary:
    """Sorted distinct values; ``code(a) < code(b)`` iff ``a < b``."""
    array = np.asarray(values)
    if array.size == 0:
        return Dictionary(values=np.asarray([], dtype=np.int64))
    return Dictionary(values=np.unique(array))


def dictionary_width(dictionary: Dictionary) -> int:
    return min_width(max(dictionary.size - 1, 0))


def encode_column(values: RawColumn, dictionary: Dictionary) -> np.ndarray:
    """Codes of ``values`` in ``dictionary``.

    Raises:
        ValidationFailure: a value is absent from the dictionary
    """
    array = np.asarray(values)
    if array.size == 0:
        return np.zeros(0, dtype=np.int64)
    codes = np.searchsorted(dictionary.values, array)
    found = codes < dictionary.size
    found[found] = dictionary.values[codes[found]] == array[found]
    if not found.all():
        missing = array[~found][0]
        raise ValidationFailure(f"value {missing!r} is not in the dictionary")
    return codes.astype(np.int64)


def decode_column(codes: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    """Values for ``codes``.

    Raises:
        ValidationFailure: a code is outside the dictionary
    """
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() >= dictionary.size):
        raise ValidationFailure(
            f"code out of range for a dictionary of {dictionary.size} values",
            {"max_code": int(codes.max()), "size": dictionary.size},
        )
    return dictionary.values[codes]


def encode_values(definition: ColumnDef, values: RawColumn, is_key: bool = False) -> EncodedColumn:
    """Encode one column.

    Strings are always dictionary-encoded. Key columns store the value itself
    so both sides of a join compare equal codes. Other numeric columns use a
    dictionary when values are negative or the dictionary width is narrower.
    """
    if definition.type == LogicalType.STRING:
        array = np.asarray(values, dtype=str)
        dictionary = build_dictionary(array)
        codes = encode_column(array, dictionary)
        return EncodedColumn(
            definition=definition,
            packed=pack_column(codes, dictionary_width(dictionary)),
            dictionary=dictionary,
            is_key=is_key,
        )

    array = np.asarray(values, dtype=np.int64)
    if array.size == 0:
        return EncodedColumn(definition=definition, packed=pack_column(array, 2), is_key=is_key)

    low, high = int(array.min()), int(array.max())
    if is_key:
        if low < 0:
            raise ValidationFailure(f"key column {definition.name} has negative value {low}")
        return EncodedColumn(definition=definition, packed=pack_column(array, min_width(high)), is_key=True)

    dictionary = build_dictionary(array)
    dict_width = dictionary_width(dictionary)
    if low < 0 or dict_width < min_width(high):
        codes = encode_column(array, dictionary)
        return EncodedColumn(definition=definition, packed=pack_column(codes, dict_width), dictionary=dictionary)
    return EncodedColumn(definition=definition, packed=pack_column(array, min_width(high)))


def column_values(column: EncodedColumn, rows: Optional[np.ndarray] = None) -> np.ndarray:
    """Logical values of a column, optionally only at ``rows``."""
    codes = unpack_column(column.packed) if rows is None else take_codes(column.packed, rows)
    if column.dictionary is None:
        return np.asarray(codes, dtype=np.int64)
    return decode_column(codes, column.dictionary)


def column_codes(column: EncodedColumn, rows: Optional[np.ndarray] = None) -> np.ndarray:
    codes = unpack_column(column.packed) if rows is None else take_codes(column.packed, rows)
    return np.asarray(codes, dtype=np.int64)


def build_table(definition: TableDef, columns: Mapping[str, RawColumn]) -> Table:
    missing = [c.name for c in definition.columns if c.name not in columns]
    if missing:
        raise SchemaError(f"table {definition.name} is missing columns {missing}")
    keys = set(definition.key_columns)
    encoded = {
        c.name: encode_values(c, columns[c.name], is_key=c.name in keys)
        for c in definition.columns
    }
    lengths = {col.packed.length for col in encoded.values()}
    if len(lengths) > 1:
        raise SchemaError(f"columns of table {definition.name} have different lengths {sorted(lengths)}")
    row_count = lengths.pop() if lengths else 0
    return Table(name=definition.name, row_count=row_count, columns=encoded)


def build_database(schema: Schema, data: Mapping[str, Mapping[str, RawColumn]]) -> Database:
    """Encode raw column data for every table of ``schema``."""
    tables: Dict[str, Table] = {}
    for definition in schema.tables:
        if definition.name not in data:
            raise SchemaError(f"no data for table {definition.name}")
        tables[definition.name] = build_table(definition, data[definition.name])
        logging_service.log_operation(
            "debug",
            "Table encoded",
            operation="build_database",
            table=definition.name,
            rows=tables[definition.name].row_count,
        )
    return Database(catalog=schema, tables=tables)


def raw_bytes(db: Database) -> int:
    """Uncompressed size: 8 B per numeric value, UTF-8 length per string."""
    total = 0
    for table in db.tables.values():
        for column in table.columns.values():
            if column.definition.type == LogicalType.STRING:
                values = column_values(column)
                total += sum(len(v.encode("utf-8")) for v in values.tolist())
            else:
                total += 8 * table.row_count
    return total


def parse_cell(cell: str, definition: ColumnDef) -> Any:
    """Convert one CSV cell to its logical value."""
    if definition.type == LogicalType.STRING:
        return cell
    text = cell.strip()
    if definition.type == LogicalType.INT:
        return int(text)
    if definition.type == LogicalType.DECIMAL:
        return int((Decimal(text) * (10 ** definition.scale)).to_integral_value())
    return (date.fromisoformat(text) - EPOCH).days


def coerce_literal(value: Any, definition: ColumnDef) -> Any:
    """Map a query literal into the column's logical value domain."""
    if definition.type == LogicalType.STRING:
        return str(value)
    if definition.type == LogicalType.DATE and isinstance(value, str):
        return (date.fromisoformat(value) - EPOCH).days
    if definition.type == LogicalType.DECIMAL:
        return int((Decimal(str(value)) * (10 ** definition.scale)).to_integral_value())
    return int(value)


def _read_table_csv(path: Path, definition: TableDef) -> Dict[str, List[Any]]:
    columns: Dict[str, List[Any]] = {c.name: [] for c in definition.columns}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        expected = [c.name for c in definition.columns]
        if header is None or [h.strip() for h in header] != expected:
            raise SchemaError(f"{path.name}: header {header} does not match {expected}")
        for row_number, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise IngestError(
                    f"{path.name} row {row_number}: expected {len(expected)} fields, got {len(row)}",
                    row=row_number,
                )
            for cell, definition_col in zip(row, definition.columns):
                try:
                    columns[definition_col.name].append(parse_cell(cell, definition_col))
                except (ValueError, InvalidOperation) as e:
                    raise IngestError(
                        f"{path.name} row {row_number}, column {definition_col.name}: "
                        f"cannot parse {cell!r} as {definition_col.type.value}",
                        row=row_number,
                        column=definition_col.name,
                    ) from e
    return columns


def load_csv(path: Union[str, Path], schema: Schema) -> Database:
    """Load ``<table>.csv`` files from a directory, or a single file for a one-table schema."""
    source = Path(path)
    data: Dict[str, Dict[str, List[Any]]] = {}
    if source.is_dir():
        for definition in schema.tables:
            data[definition.name] = _read_table_csv(source / f"{definition.name}.csv", definition)
    else:
        if len(schema.tables) != 1:
            raise SchemaError("a single CSV file can only load a one-table schema")
        data[schema.tables[0].name] = _read_table_csv(source, schema.tables[0])
    db = build_database(schema, data)
    logging_service.log_step("load_csv", True, path=str(source), rows=db.row_counts())
    return db
