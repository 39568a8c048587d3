"""Name resolution and validation of QueryIR against a schema."""

import logging
from typing import Callable, Dict, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict

from pim_olap_sim.models.errors import SchemaError, UnknownColumnError, ValidationFailure
from pim_olap_sim.models.query import AggFunc, BoolExpr, ColumnRef, JoinEdge, QueryIR, ValueExpr
from pim_olap_sim.models.schema import ColumnDef, LogicalType, Schema

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHAIN = 2

RefMapper = Callable[[ColumnRef], ColumnRef]


class BoundQuery(BaseModel):
    """A query whose column references all carry a known alias."""

    model_config = ConfigDict(frozen=True)

    query: QueryIR
    catalog: Schema
    tables: Dict[str, str]
    paths: Dict[str, Tuple[str, ...]]
    residual_aliases: Set[str]

    @property
    def fact(self) -> str:
        return self.query.table

    def column_def(self, ref: ColumnRef) -> ColumnDef:
        definition = self.catalog.table(self.tables[ref.alias]).column(ref.column)
        if definition is None:
            raise UnknownColumnError(f"unknown column {ref}")
        return definition

    def join_for(self, alias: str) -> Optional[JoinEdge]:
        for join in self.query.joins:
            if join.alias == alias:
                return join
        return None

    def primary_key(self, alias: str) -> str:
        return self.catalog.table(self.tables[alias]).primary_key[0]

    def determining_key(self, alias: str) -> Optional[ColumnRef]:
        """Group-by reference that fixes one row of ``alias``: its primary key or the FK pointing at it."""
        join = self.join_for(alias)
        if join is None:
            return None
        candidates = (
            ColumnRef(alias=alias, column=self.primary_key(alias)),
            ColumnRef(alias=join.source, column=join.fk),
        )
        for candidate in candidates:
            if candidate in self.query.group_by:
                return candidate
        return None


def map_value_expr(expr: ValueExpr, fn: RefMapper) -> ValueExpr:
    return expr.model_copy(
        update={
            "column": fn(expr.column) if expr.column is not None else None,
            "args": [map_value_expr(arg, fn) for arg in expr.args],
        }
    )


def map_bool_expr(expr: BoolExpr, fn: RefMapper) -> BoolExpr:
    return expr.model_copy(
        update={
            "column": fn(expr.column) if expr.column is not None else None,
            "children": [map_bool_expr(child, fn) for child in expr.children],
        }
    )


def map_query_refs(q: QueryIR, fn: RefMapper) -> QueryIR:
    """Apply ``fn`` to every column reference of ``q``."""
    select = [
        item.model_copy(update={"expr": map_value_expr(item.expr, fn) if item.expr is not None else None})
        for item in q.select
    ]
    residual = [rj.model_copy(update={"key": fn(rj.key)}) for rj in q.residual_joins]
    return q.model_copy(
        update={
            "select": select,
            "where": map_bool_expr(q.where, fn) if q.where is not None else None,
            "group_by": [fn(ref) for ref in q.group_by],
            "residual_joins": residual,
        }
    )


def _bind_joins(q: QueryIR, schema: Schema, max_chain: int) -> Tuple[Dict[str, str], Dict[str, Tuple[str, ...]]]:
    if not schema.has_table(q.table):
        raise SchemaError(f"unknown table {q.table}")
    tables = {q.table: q.table}
    paths: Dict[str, Tuple[str, ...]] = {q.table: ()}
    chain_tables: Dict[str, Tuple[str, ...]] = {q.table: (q.table,)}

    for join in q.joins:
        if join.alias in tables:
            raise SchemaError(f"duplicate alias {join.alias} in query {q.id}")
        if join.source not in tables:
            raise SchemaError(f"join source {join.source} is not defined before {join.alias}")
        if not schema.has_table(join.table):
            raise SchemaError(f"unknown table {join.table}")
        fk = schema.table(tables[join.source]).foreign_key(join.fk)
        if fk is None or fk.table != join.table:
            raise SchemaError(f"{join.source}.{join.fk} is not a declared foreign key to {join.table}")
        if join.table in chain_tables[join.source]:
            raise SchemaError(f"FK cycle through {join.table} in query {q.id}")
        path = paths[join.source] + (join.fk,)
        if len(path) - 1 > max_chain:
            raise SchemaError(
                f"{join.alias} is {len(path) - 1} hops past the fact table (limit {max_chain})",
                {"path": list(path)},
            )
        tables[join.alias] = join.table
        paths[join.alias] = path
        chain_tables[join.alias] = chain_tables[join.source] + (join.table,)
    return tables, paths


def _resolver(schema: Schema, tables: Dict[str, str], residual: Set[str]) -> RefMapper:
    def resolve(ref: ColumnRef) -> ColumnRef:
        if ref.alias:
            if ref.alias not in tables:
                raise UnknownColumnError(f"unknown alias in {ref}", {"column": str(ref)})
            if schema.table(tables[ref.alias]).column(ref.column) is None:
                raise UnknownColumnError(f"unknown column {ref}", {"column": str(ref)})
            return ref
        matches = [
            alias for alias, table in tables.items()
            if alias not in residual and schema.table(table).column(ref.column) is not None
        ]
        if not matches:
            raise UnknownColumnError(f"unknown column {ref.column}", {"column": ref.column})
        if len(matches) > 1:
            raise UnknownColumnError(
                f"column {ref.column} is ambiguous between {matches}",
                {"column": ref.column, "aliases": matches},
            )
        return ColumnRef(alias=matches[0], column=ref.column)

    return resolve


def _check_numeric(bq: BoundQuery, expr: ValueExpr, item_name: str) -> None:
    for ref in expr.columns():
        if bq.column_def(ref).type == LogicalType.STRING:
            raise ValidationFailure(f"select item {item_name}: string column {ref} in arithmetic or SUM/MIN/MAX")


def _validate(bq: BoundQuery) -> None:
    q = bq.query
    for item in q.select:
        if item.expr is None:
            continue
        residual_refs = [ref for ref in item.expr.columns() if ref.alias in bq.residual_aliases]
        if residual_refs and (item.agg is not None or item.expr.kind != "col"):
            raise ValidationFailure(f"select item {item.name}: residual columns can only be selected plainly")
        if item.agg in (AggFunc.SUM, AggFunc.MIN, AggFunc.MAX) or item.expr.kind != "col":
            _check_numeric(bq, item.expr, item.name)

    if q.is_aggregate:
        for item in q.select:
            if item.agg is not None:
                continue
            if item.expr is None or item.expr.kind != "col":
                raise ValidationFailure(f"select item {item.name} must be aggregated or grouped")
            ref = item.expr.column
            if ref in q.group_by or ref.alias in bq.residual_aliases:
                continue
            if bq.determining_key(ref.alias) is None:
                raise ValidationFailure(
                    f"select item {item.name} is neither grouped nor determined by a grouped key",
                    {"column": str(ref)},
                )

    names = {item.name for item in q.select}
    for key in q.order_by:
        if key.name not in names:
            raise UnknownColumnError(f"order by {key.name} is not an output column", {"column": key.name})


def bind_query(q: QueryIR, schema: Schema, max_chain: int = DEFAULT_MAX_CHAIN) -> BoundQuery:
    """Resolve bare names to aliases and validate joins, types and grouping.

    Raises:
        UnknownColumnError: a column is missing or ambiguous
        SchemaError: a join does not follow a declared FK, cycles or is too deep
        ValidationFailure: grouping or typing rules are violated
    """
    tables, paths = _bind_joins(q, schema, max_chain)
    residual: Set[str] = set()
    for rj in q.residual_joins:
        if not schema.has_table(rj.table):
            raise SchemaError(f"unknown residual table {rj.table}")
        tables.setdefault(rj.alias, rj.table)
        residual.add(rj.alias)

    bound = map_query_refs(q, _resolver(schema, tables, residual))
    bq = BoundQuery(query=bound, catalog=schema, tables=tables, paths=paths, residual_aliases=residual)
    _validate(bq)
    logger.debug("Query bound", extra={"query": q.id, "aliases": list(tables)})
    return bq
