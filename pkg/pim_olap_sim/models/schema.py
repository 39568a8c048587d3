"""Relational schema models."""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class LogicalType(str, Enum):
    INT = "int"
    DECIMAL = "decimal"
    DATE = "date"
    STRING = "string"


class ColumnDef(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    type: LogicalType
    scale: int = Field(default=2, ge=0, description="Implied decimal places for decimal columns")


class ForeignKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    column: str
    table: str


class TableDef(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    columns: List[ColumnDef]
    primary_key: List[str] = Field(default_factory=list)
    foreign_keys: List[ForeignKey] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_keys(self) -> "TableDef":
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in table {self.name}")
        for key in self.primary_key:
            if key not in names:
                raise ValueError(f"primary key column {key} not in table {self.name}")
        for fk in self.foreign_keys:
            if fk.column not in names:
                raise ValueError(f"foreign key column {fk.column} not in table {self.name}")
        return self

    def column(self, name: str) -> Optional[ColumnDef]:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def foreign_key(self, column: str) -> Optional[ForeignKey]:
        for fk in self.foreign_keys:
            if fk.column == column:
                return fk
        return None

    @property
    def key_columns(self) -> List[str]:
        return list(dict.fromkeys(self.primary_key + [fk.column for fk in self.foreign_keys]))


class Schema(BaseModel):
    """A set of tables whose foreign keys all reference single-column primary keys."""

    model_config = ConfigDict(frozen=True)

    name: str = "schema"
    fact_table: Optional[str] = None
    tables: List[TableDef]

    @model_validator(mode="after")
    def validate_references(self) -> "Schema":
        by_name: Dict[str, TableDef] = {t.name: t for t in self.tables}
        if len(by_name) != len(self.tables):
            raise ValueError("duplicate table names")
        for table in self.tables:
            for fk in table.foreign_keys:
                target = by_name.get(fk.table)
                if target is None:
                    raise ValueError(f"{table.name}.{fk.column} references missing table {fk.table}")
                if len(target.primary_key) != 1:
                    raise ValueError(f"{fk.table} needs a single-column primary key to be referenced")
        if self.fact_table is not None and self.fact_table not in by_name:
            raise ValueError(f"fact table {self.fact_table} not in schema")
        return self

    def table(self, name: str) -> TableDef:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(name)

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    def with_table(self, replacement: TableDef) -> "Schema":
        tables = [replacement if t.name == replacement.name else t for t in self.tables]
        return Schema(name=self.name, fact_table=self.fact_table, tables=tables)
