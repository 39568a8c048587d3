"""Declarative query representation (QueryIR).

Fixture files use a compact JSON shorthand that the validators below expand:

* column references are ``"column"`` or ``"alias.column"``;
* value expressions are a column string, an integer, or ``{"mul": [a, b]}``
  style arithmetic (``add``, ``sub``, ``mul``);
* boolean expressions are ``{"and": [...]}``, ``{"or": [...]}``,
  ``{"col": ..., "op": ..., "value": ..., "high": ...}`` or
  ``{"col": ..., "like": "PROMO%"}``.
"""

from enum import Enum
from typing import Any, Iterator, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pim_olap_sim.models.kernel import CompareOp


Scalar = Union[int, float, str]


class ColumnRef(BaseModel):
    """A column of a table instance. An empty alias means not yet bound."""

    model_config = ConfigDict(frozen=True)

    alias: str = ""
    column: str

    @model_validator(mode="before")
    @classmethod
    def parse_dotted(cls, data: Any) -> Any:
        if isinstance(data, str):
            alias, _, column = data.rpartition(".")
            return {"alias": alias, "column": column}
        return data

    def __str__(self) -> str:
        return f"{self.alias}.{self.column}" if self.alias else self.column


class ValueExpr(BaseModel):
    """Integer-valued expression over columns."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["col", "const", "add", "sub", "mul"]
    column: Optional[ColumnRef] = None
    value: Optional[int] = None
    args: List["ValueExpr"] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def expand_shorthand(cls, data: Any) -> Any:
        if isinstance(data, str):
            return {"kind": "col", "column": data}
        if isinstance(data, int) and not isinstance(data, bool):
            return {"kind": "const", "value": data}
        if isinstance(data, dict) and "kind" not in data:
            for op in ("add", "sub", "mul"):
                if op in data:
                    return {"kind": op, "args": data[op]}
            if "col" in data:
                return {"kind": "col", "column": data["col"]}
            if "const" in data:
                return {"kind": "const", "value": data["const"]}
        return data

    @model_validator(mode="after")
    def validate_shape(self) -> "ValueExpr":
        if self.kind == "col" and self.column is None:
            raise ValueError("column expression needs a column")
        if self.kind == "const" and self.value is None:
            raise ValueError("constant expression needs a value")
        if self.kind in ("add", "sub", "mul") and len(self.args) != 2:
            raise ValueError(f"{self.kind} takes exactly two arguments")
        return self

    def columns(self) -> Iterator[ColumnRef]:
        if self.column is not None:
            yield self.column
        for arg in self.args:
            yield from arg.columns()


class BoolExpr(BaseModel):
    """WHERE clause tree of AND/OR nodes over comparisons and LIKE terms."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["and", "or", "cmp", "like"]
    children: List["BoolExpr"] = Field(default_factory=list)
    column: Optional[ColumnRef] = None
    op: Optional[CompareOp] = None
    value: Optional[Scalar] = None
    high: Optional[Scalar] = None
    pattern: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def expand_shorthand(cls, data: Any) -> Any:
        if isinstance(data, dict) and "kind" not in data:
            if "and" in data:
                return {"kind": "and", "children": data["and"]}
            if "or" in data:
                return {"kind": "or", "children": data["or"]}
            if "like" in data:
                return {"kind": "like", "column": data["col"], "pattern": data["like"]}
            if "col" in data:
                expanded = {k: v for k, v in data.items() if k != "col"}
                expanded.update({"kind": "cmp", "column": data["col"]})
                return expanded
        return data

    @model_validator(mode="after")
    def validate_shape(self) -> "BoolExpr":
        if self.kind in ("and", "or") and not self.children:
            raise ValueError(f"{self.kind} needs at least one child")
        if self.kind == "cmp":
            if self.column is None or self.op is None or self.value is None:
                raise ValueError("comparison needs column, op and value")
            if self.op == CompareOp.BETWEEN and self.high is None:
                raise ValueError("between needs a high value")
        if self.kind == "like" and (self.column is None or self.pattern is None):
            raise ValueError("like needs a column and a pattern")
        return self

    def columns(self) -> Iterator[ColumnRef]:
        if self.column is not None:
            yield self.column
        for child in self.children:
            yield from child.columns()

    def aliases(self) -> set:
        return {ref.alias for ref in self.columns()}

    def conjuncts(self) -> List["BoolExpr"]:
        """Top-level AND terms, flattening nested ANDs."""
        if self.kind != "and":
            return [self]
        terms: List[BoolExpr] = []
        for child in self.children:
            terms.extend(child.conjuncts())
        return terms

    @classmethod
    def conjunction(cls, terms: List["BoolExpr"]) -> Optional["BoolExpr"]:
        if not terms:
            return None
        if len(terms) == 1:
            return terms[0]
        return cls(kind="and", children=terms)


class AggFunc(str, Enum):
    SUM = "sum"
    COUNT = "count"
    MIN = "min"
    MAX = "max"


class SelectItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    expr: Optional[ValueExpr] = None
    agg: Optional[AggFunc] = None

    @model_validator(mode="before")
    @classmethod
    def expand_shorthand(cls, data: Any) -> Any:
        if isinstance(data, str):
            return {"name": data.rpartition(".")[2], "expr": data}
        return data

    @model_validator(mode="after")
    def validate_shape(self) -> "SelectItem":
        if self.expr is None and self.agg != AggFunc.COUNT:
            raise ValueError(f"select item {self.name} needs an expression")
        return self


class JoinEdge(BaseModel):
    """``source.fk = alias.<primary key>`` where ``alias`` is an instance of ``table``."""

    model_config = ConfigDict(frozen=True)

    source: str
    fk: str
    table: str
    alias: str = ""

    @model_validator(mode="before")
    @classmethod
    def default_alias(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("alias"):
            return {**data, "alias": data.get("table", "")}
        return data


class OrderKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    desc: bool = False


class ResidualJoin(BaseModel):
    """Post-aggregation lookup of functionally determined columns by a grouped key."""

    model_config = ConfigDict(frozen=True)

    alias: str
    table: str
    key: ColumnRef
    columns: List[str]


class QueryIR(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    table: str = Field(..., description="Fact table; its alias is the table name")
    select: List[SelectItem]
    where: Optional[BoolExpr] = None
    joins: List[JoinEdge] = Field(default_factory=list)
    group_by: List[ColumnRef] = Field(default_factory=list)
    order_by: List[OrderKey] = Field(default_factory=list)
    limit: Optional[int] = Field(default=None, ge=0)
    residual_joins: List[ResidualJoin] = Field(default_factory=list)

    @field_validator("select")
    @classmethod
    def validate_select(cls, v: List[SelectItem]) -> List[SelectItem]:
        if not v:
            raise ValueError("select list cannot be empty")
        names = [item.name for item in v]
        if len(set(names)) != len(names):
            raise ValueError("duplicate output column names")
        return v

    @property
    def is_aggregate(self) -> bool:
        return bool(self.group_by) or any(item.agg is not None for item in self.select)

    @property
    def aliases(self) -> List[str]:
        return [self.table] + [j.alias for j in self.joins]

    def referenced_columns(self) -> Iterator[ColumnRef]:
        for item in self.select:
            if item.expr is not None:
                yield from item.expr.columns()
        if self.where is not None:
            yield from self.where.columns()
        yield from self.group_by


ValueExpr.model_rebuild()
BoolExpr.model_rebuild()
