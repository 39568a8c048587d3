"""Row-at-a-time reference interpreter used as a correctness oracle."""

import logging
from typing import Any, Dict, List, Optional, Tuple

from pim_olap_sim.models.errors import DanglingForeignKeyError
from pim_olap_sim.models.kernel import CompareOp
from pim_olap_sim.models.query import AggFunc, BoolExpr, ColumnRef, QueryIR, ValueExpr
from pim_olap_sim.models.reports import ResultTable
from pim_olap_sim.models.store import Database
from pim_olap_sim.services.columnar_store import column_values
from pim_olap_sim.services.query_binding import BoundQuery, bind_query
from pim_olap_sim.services.query_ops import finalize, like_to_regex, literal_for

logger = logging.getLogger(__name__)

Env = Dict[str, int]


class _Interpreter:
    def __init__(self, bq: BoundQuery, db: Database):
        self._bq = bq
        self._db = db
        self._columns: Dict[Tuple[str, str], List[Any]] = {}
        self._indexes: Dict[str, Dict[Any, int]] = {}

    def column(self, table: str, name: str) -> List[Any]:
        key = (table, name)
        if key not in self._columns:
            self._columns[key] = column_values(self._db.table(table).columns[name]).tolist()
        return self._columns[key]

    def lookup(self, table: str, key: Any) -> Optional[int]:
        if table not in self._indexes:
            pk = self._db.catalog.table(table).primary_key[0]
            self._indexes[table] = {k: i for i, k in enumerate(self.column(table, pk))}
        return self._indexes[table].get(key)

    def value(self, ref: ColumnRef, env: Env) -> Any:
        return self.column(self._bq.tables[ref.alias], ref.column)[env[ref.alias]]

    def test(self, expr: BoolExpr, env: Env) -> bool:
        if expr.kind == "and":
            return all(self.test(child, env) for child in expr.children)
        if expr.kind == "or":
            return any(self.test(child, env) for child in expr.children)
        value = self.value(expr.column, env)
        if expr.kind == "like":
            return like_to_regex(expr.pattern).fullmatch(str(value)) is not None
        low, high = literal_for(expr, self._bq.column_def(expr.column))
        op = expr.op
        if op == CompareOp.EQ:
            return value == low
        if op == CompareOp.NEQ:
            return value != low
        if op == CompareOp.LT:
            return value < low
        if op == CompareOp.LE:
            return value <= low
        if op == CompareOp.GT:
            return value > low
        if op == CompareOp.GE:
            return value >= low
        return low <= value <= high

    def compute(self, expr: ValueExpr, env: Env) -> Any:
        if expr.kind == "col":
            return self.value(expr.column, env)
        if expr.kind == "const":
            return expr.value
        left = self.compute(expr.args[0], env)
        right = self.compute(expr.args[1], env)
        if expr.kind == "add":
            return left + right
        if expr.kind == "sub":
            return left - right
        return left * right

    def rows(self) -> List[Env]:
        q = self._bq.query
        matched: List[Env] = []
        for i in range(self._db.table(q.table).row_count):
            env: Env = {q.table: i}
            for join in q.joins:
                target = self.lookup(join.table, self.value(ColumnRef(alias=join.source, column=join.fk), env))
                if target is None:
                    break
                env[join.alias] = target
            else:
                if q.where is None or self.test(q.where, env):
                    matched.append(env)
        return matched


def _accumulate(func: AggFunc, state: Any, value: Any) -> Any:
    if func == AggFunc.COUNT:
        return state + 1
    if state is None:
        return value
    if func == AggFunc.SUM:
        return state + value
    if func == AggFunc.MIN:
        return min(state, value)
    return max(state, value)


def execute_reference(q: QueryIR, db: Database) -> ResultTable:
    """Evaluate ``q`` one row at a time with index nested-loop joins on primary keys."""
    bq = bind_query(q, db.catalog)
    query = bq.query
    interp = _Interpreter(bq, db)
    names = [item.name for item in query.select]
    matched = interp.rows()

    if not query.is_aggregate:
        rows = [[interp.compute(item.expr, env) for item in query.select] for env in matched]
        return finalize(names, rows, query.order_by, query.limit)

    residual = {rj.alias: rj for rj in query.residual_joins}
    groups: Dict[Tuple[Any, ...], Dict[str, Any]] = {}
    for env in matched:
        key = tuple(interp.value(ref, env) for ref in query.group_by)
        if key not in groups:
            groups[key] = {"env": env, "acc": [0 if item.agg == AggFunc.COUNT else None for item in query.select]}
        state = groups[key]
        for i, item in enumerate(query.select):
            if item.agg is not None:
                value = interp.compute(item.expr, env) if item.expr is not None else None
                state["acc"][i] = _accumulate(item.agg, state["acc"][i], value)

    if not groups and not query.group_by:
        empty = [0 if item.agg == AggFunc.COUNT else None for item in query.select]
        return finalize(names, [empty], query.order_by, query.limit)

    rows = []
    for key, state in groups.items():
        row = []
        for i, item in enumerate(query.select):
            if item.agg is not None:
                row.append(state["acc"][i])
                continue
            ref = item.expr.column
            if ref.alias in residual:
                rj = residual[ref.alias]
                key_value = key[query.group_by.index(rj.key)]
                target = interp.lookup(rj.table, key_value)
                if target is None:
                    raise DanglingForeignKeyError(f"{rj.table} has no row with key {key_value}")
                row.append(interp.column(rj.table, ref.column)[target])
            else:
                row.append(interp.value(ref, state["env"]))
        rows.append(row)
    logger.debug("Reference evaluation finished", extra={"query": q.id, "rows": len(rows)})
    return finalize(names, rows, query.order_by, query.limit)
