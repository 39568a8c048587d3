"""In-memory encoded database models."""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pim_olap_sim.models.kernel import PackedColumn
from pim_olap_sim.models.schema import ColumnDef, Schema


class Dictionary(BaseModel):
    """Sorted distinct values; a value's code is its rank."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_string(self) -> bool:
        return self.values.dtype.kind in ("U", "O")

    @property
    def nbytes(self) -> int:
        """Serialized payload: 8 B per integer, UTF-8 bytes plus a 4 B offset per string."""
        if self.is_string:
            return sum(len(str(v).encode("utf-8")) + 4 for v in self.values.tolist())
        return self.size * 8


class EncodedColumn(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    definition: ColumnDef
    packed: PackedColumn
    dictionary: Optional[Dictionary] = None
    is_key: bool = False

    @property
    def name(self) -> str:
        return self.definition.name

    @property
    def width(self) -> int:
        return self.packed.width

    @property
    def max_code(self) -> int:
        return (1 << self.packed.width) - 1

    @property
    def encoded_bytes(self) -> int:
        return self.packed.nbytes + (self.dictionary.nbytes if self.dictionary is not None else 0)


class Table(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    row_count: int = Field(..., ge=0)
    columns: Dict[str, EncodedColumn]

    @model_validator(mode="after")
    def validate_lengths(self) -> "Table":
        for column in self.columns.values():
            if column.packed.length != self.row_count:
                raise ValueError(f"column {column.name} has {column.packed.length} rows, table has {self.row_count}")
        return self

    @property
    def column_names(self) -> List[str]:
        return list(self.columns)

    @property
    def encoded_bytes(self) -> int:
        return sum(c.encoded_bytes for c in self.columns.values())


class Database(BaseModel):
    """Schema plus one encoded table per schema table. Immutable once built."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    catalog: Schema
    tables: Dict[str, Table]

    def table(self, name: str) -> Table:
        return self.tables[name]

    def row_counts(self) -> Dict[str, int]:
        return {name: t.row_count for name, t in self.tables.items()}

    def encoded_bytes(self) -> int:
        return sum(t.encoded_bytes for t in self.tables.values())


class StoreManifest(BaseModel):
    """Sidecar JSON describing a saved store. Holds no timestamps so reruns are byte-identical."""

    name: str
    schema_name: str
    format_version: int
    row_counts: Dict[str, int]
    encoded_bytes: int = Field(..., ge=0)
    raw_bytes: int = Field(..., ge=0)
    scale_factor: Optional[float] = None
    seed: Optional[int] = None
    denorm_level: Optional[str] = None
