"""Plan execution: PIM-modeled filtering followed by host gather, join and aggregate."""

import logging
import time
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import DanglingForeignKeyError, ValidationFailure
from pim_olap_sim.models.hardware import DramConfig, LatencyBreakdown, PimLevelSpec
from pim_olap_sim.models.kernel import Bitmap, CompareOp, Predicate
from pim_olap_sim.models.plans import PhysicalPlan, PimPredicate, PimTree
from pim_olap_sim.models.query import ColumnRef, QueryIR
from pim_olap_sim.models.reports import ExecutionReport, ResultTable, SelectivityPoint
from pim_olap_sim.models.store import Database, Table
from pim_olap_sim.services.columnar_store import column_values
from pim_olap_sim.services.filter_kernel import (
    bitmap_and,
    bitmap_or,
    compile_predicate,
    filter_column,
    pack_column,
    popcount,
    set_bit_positions,
)
from pim_olap_sim.services.pim_timing import query_filter_latency, validate_level_spec
from pim_olap_sim.services.planner import plan_query
from pim_olap_sim.services.query_ops import eval_bool_expr, eval_value_expr, finalize, group_aggregate, hash_join

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

DEFAULT_SWEEP_ROWS = 1 << 26
MATERIALIZED_SWEEP_ROWS = 1 << 20


class _Frame:
    """Aligned row positions of every joined alias, with lazily decoded columns."""

    def __init__(self, db: Database, tables: Dict[str, str], fact: str, rows: np.ndarray):
        self._db = db
        self._tables = tables
        self.rows: Dict[str, np.ndarray] = {fact: rows}
        self._cache: Dict[Tuple[str, str], np.ndarray] = {}

    @property
    def size(self) -> int:
        return int(next(iter(self.rows.values())).size)

    def table(self, alias: str) -> Table:
        return self._db.table(self._tables[alias])

    def fetch(self, ref: ColumnRef) -> np.ndarray:
        key = (ref.alias, ref.column)
        if key not in self._cache:
            column = self.table(ref.alias).columns[ref.column]
            self._cache[key] = column_values(column, self.rows[ref.alias])
        return self._cache[key]

    def add(self, alias: str, rows: np.ndarray) -> None:
        self.rows[alias] = rows

    def keep(self, positions: np.ndarray) -> None:
        self.rows = {alias: rows[positions] for alias, rows in self.rows.items()}
        self._cache = {key: values[positions] for key, values in self._cache.items()}


@contextmanager
def _timed(wall: Dict[str, float], operator: str) -> Iterator[None]:
    start = time.perf_counter_ns()
    try:
        yield
    finally:
        wall[operator] = wall.get(operator, 0.0) + float(time.perf_counter_ns() - start)


def _evaluate_tree(tree: PimTree, table: Table) -> Bitmap:
    """Per-branch bitmaps; AND accumulates in the filter unit, OR combines on the host."""
    if tree.kind == "leaf":
        return _filter_leaf(tree.leaf, table, None)
    if tree.kind == "and":
        acc: Optional[Bitmap] = None
        for child in tree.children:
            if child.kind == "leaf":
                acc = _filter_leaf(child.leaf, table, acc)
            else:
                branch = _evaluate_tree(child, table)
                acc = branch if acc is None else bitmap_and(acc, branch)
        return acc
    result: Optional[Bitmap] = None
    for child in tree.children:
        branch = _evaluate_tree(child, table)
        result = branch if result is None else bitmap_or(result, branch)
    return result


def _filter_leaf(leaf: PimPredicate, table: Table, acc: Optional[Bitmap]) -> Bitmap:
    column = table.columns[leaf.column]
    return filter_column(column.packed, compile_predicate(leaf.predicate, column.width), acc)


def pim_filter(plan: PhysicalPlan, table: Table) -> Bitmap:
    """Final selection bitmap of the plan's PIM predicates and disjunctions."""
    bitmap: Optional[Bitmap] = None
    for leaf in plan.pim_predicates:
        bitmap = _filter_leaf(leaf, table, bitmap)
    for tree in plan.pim_disjunctions:
        branch = _evaluate_tree(tree, table)
        bitmap = branch if bitmap is None else bitmap_and(bitmap, branch)
    return bitmap if bitmap is not None else Bitmap.ones(table.row_count)


def _filter_bytes(plan: PhysicalPlan, table: Table) -> List[int]:
    leaves = list(plan.pim_predicates) + [leaf for tree in plan.pim_disjunctions for leaf in tree.leaves()]
    return [table.columns[leaf.column].packed.nbytes for leaf in leaves]


def host_operator_model(
    cfg: DramConfig,
    rows_gathered: int,
    bytes_per_row: float,
    join_probes: int,
    aggregate_rows: int,
) -> Dict[str, float]:
    host = cfg.host
    return {
        "gather": rows_gathered * bytes_per_row / (host.seq_bandwidth_gbps / host.random_derate),
        "join": host.join_ns_per_row * join_probes,
        "aggregate": host.aggregate_ns_per_row * aggregate_rows,
        "overhead": host.query_overhead_ns,
    }


def cpu_cost_model(
    rows_gathered: int,
    bytes_per_row: float,
    cfg: DramConfig,
    join_probes: int = 0,
    aggregate_rows: Optional[int] = None,
) -> float:
    """Analytic host time: fixed overhead, derated gather, join probes and a linear aggregate term (ns).

    ``aggregate_rows`` defaults to every gathered row.
    """
    if aggregate_rows is None:
        aggregate_rows = rows_gathered
    return sum(host_operator_model(cfg, rows_gathered, bytes_per_row, join_probes, aggregate_rows).values())


def model_times(
    cfg: DramConfig,
    spec: PimLevelSpec,
    row_count: int,
    filter_bytes: Sequence[int],
    rows_gathered: int,
    bytes_per_row: float,
    join_probes: int,
    aggregate_rows: int,
) -> Tuple[LatencyBreakdown, Dict[str, float], Dict[str, float]]:
    """PIM latency, PIM-path operator times and CPU-only operator times (ns).

    The CPU-only path scans every filtered column on the host instead of
    using the PIM filter and the selection bitmap.
    """
    host = cfg.host
    latency = query_filter_latency(cfg, spec, list(filter_bytes))
    shared = host_operator_model(cfg, rows_gathered, bytes_per_row, join_probes, aggregate_rows)
    bitmap_scan = (row_count / 8) / host.seq_bandwidth_gbps if filter_bytes else 0.0
    pim_ops = {"pim_filter": latency.total, "bitmap_scan": bitmap_scan, **shared}
    host_filter = host.scan_ns_per_row * row_count * len(filter_bytes) + sum(filter_bytes) / host.seq_bandwidth_gbps
    cpu_ops = {"host_filter": host_filter, **shared}
    return latency, pim_ops, cpu_ops


def _alias_tables(plan: PhysicalPlan) -> Dict[str, str]:
    tables = {plan.target_table: plan.target_table}
    tables.update({j.alias: j.table for j in plan.joins})
    tables.update({rj.alias: rj.table for rj in plan.residual_joins})
    return tables


def _run_joins(plan: PhysicalPlan, db: Database, frame: _Frame, tables: Dict[str, str]) -> int:
    """Hash-join every dimension in plan order; returns the number of probes."""
    probes = 0
    for join in plan.joins:
        dim = db.table(join.table)
        pk = db.catalog.table(join.table).primary_key[0]
        build_keys = column_values(dim.columns[pk])
        mask = None
        if join.alias in plan.build_filters:
            dim_rows = np.arange(dim.row_count)

            def fetch_dim(ref: ColumnRef, rows: np.ndarray = dim_rows) -> np.ndarray:
                return column_values(db.table(tables[ref.alias]).columns[ref.column], rows)

            mask = eval_bool_expr(
                plan.build_filters[join.alias],
                fetch_dim,
                lambda ref: db.catalog.table(tables[ref.alias]).column(ref.column),
                dim.row_count,
            )
        probe_keys = frame.fetch(ColumnRef(alias=join.source, column=join.fk))
        probes += int(probe_keys.size)
        keep, matched = hash_join(probe_keys, build_keys, mask)
        frame.keep(keep)
        frame.add(join.alias, matched)
    return probes


def _residual_lookup(db: Database, table_name: str, keys: np.ndarray, columns: Sequence[str]) -> Dict[str, np.ndarray]:
    table = db.table(table_name)
    pk = db.catalog.table(table_name).primary_key[0]
    index = {k: i for i, k in enumerate(column_values(table.columns[pk]).tolist())}
    rows = []
    for key in keys.tolist():
        if key not in index:
            raise DanglingForeignKeyError(f"{table_name} has no row with key {key}", {"key": key})
        rows.append(index[key])
    positions = np.asarray(rows, dtype=np.int64)
    return {c: column_values(table.columns[c], positions) for c in columns}


def _project(plan: PhysicalPlan, db: Database, frame: _Frame) -> ResultTable:
    q = plan.query
    names = [item.name for item in q.select]
    size = frame.size

    if not q.is_aggregate:
        columns = [eval_value_expr(item.expr, frame.fetch, size) for item in q.select]
        rows = [list(row) for row in zip(*[c.tolist() for c in columns])] if columns else []
        return finalize(names, rows, q.order_by, q.limit)

    residual_aliases = {rj.alias for rj in plan.residual_joins}
    keys = [frame.fetch(ref) for ref in q.group_by]
    aggregates = [
        (item.agg, eval_value_expr(item.expr, frame.fetch, size) if item.expr is not None else None)
        for item in q.select if item.agg is not None
    ]
    carried_items = [
        item for item in q.select
        if item.agg is None and item.expr.column not in q.group_by and item.expr.column.alias not in residual_aliases
    ]
    group_keys, agg_values, carried = group_aggregate(
        keys, aggregates, [frame.fetch(item.expr.column) for item in carried_items], size
    )
    count = len(agg_values[0]) if agg_values else (len(group_keys[0]) if group_keys else 1)

    by_ref: Dict[ColumnRef, List] = {ref: group_keys[i].tolist() for i, ref in enumerate(q.group_by)}
    by_ref.update({item.expr.column: carried[i].tolist() for i, item in enumerate(carried_items)})
    for rj in plan.residual_joins:
        if rj.key not in q.group_by:
            raise ValidationFailure(f"residual join key {rj.key} is not grouped")
        fetched = _residual_lookup(db, rj.table, group_keys[q.group_by.index(rj.key)], rj.columns)
        by_ref.update({ColumnRef(alias=rj.alias, column=c): v.tolist() for c, v in fetched.items()})

    output: List[List] = []
    agg_iter = iter(agg_values)
    for item in q.select:
        output.append(next(agg_iter) if item.agg is not None else by_ref[item.expr.column])
    rows = [[column[i] for column in output] for i in range(count)]
    return finalize(names, rows, q.order_by, q.limit)


def execute(plan: PhysicalPlan, db: Database, cfg: DramConfig) -> ExecutionReport:
    """Run a physical plan; the result does not depend on the PIM level.

    Raises:
        AggregateOverflowError: an accumulator leaves the 64-bit range
        DanglingForeignKeyError: a residual join key has no dimension row
    """
    validate_level_spec(cfg, plan.spec)
    q = plan.query
    table = db.table(plan.target_table)
    tables = _alias_tables(plan)
    wall: Dict[str, float] = {}

    try:
        with _timed(wall, "pim_filter"):
            bitmap = pim_filter(plan, table)
        selected = popcount(bitmap)

        with _timed(wall, "gather"):
            rows = set_bit_positions(bitmap)
            frame = _Frame(db, tables, plan.target_table, rows)
            fact_columns = {
                ref.column for ref in q.referenced_columns() if ref.alias == plan.target_table
            } | {j.fk for j in plan.joins if j.source == plan.target_table}
            for name in sorted(fact_columns):
                frame.fetch(ColumnRef(alias=plan.target_table, column=name))
        rows_gathered = int(rows.size)
        bytes_per_row = sum(table.columns[c].width for c in fact_columns) / 8

        with _timed(wall, "join"):
            probes = _run_joins(plan, db, frame, tables)
            if plan.cpu_predicates is not None:
                mask = eval_bool_expr(
                    plan.cpu_predicates,
                    frame.fetch,
                    lambda ref: db.catalog.table(tables[ref.alias]).column(ref.column),
                    frame.size,
                )
                frame.keep(np.flatnonzero(mask))
        aggregate_rows = frame.size

        with _timed(wall, "aggregate"):
            result = _project(plan, db, frame)
    except Exception as e:
        logging_service.log_error("Query execution failed", e, query=q.id, operation="execute")
        raise

    latency, pim_ops, cpu_ops = model_times(
        cfg,
        plan.spec,
        table.row_count,
        _filter_bytes(plan, table),
        rows_gathered,
        bytes_per_row,
        probes,
        aggregate_rows,
    )
    report = ExecutionReport(
        query=q.id,
        level=plan.spec.label,
        result=result,
        row_count=table.row_count,
        rows_gathered=rows_gathered,
        pim_selectivity=selected / table.row_count if table.row_count else 0.0,
        pim_passes=plan.pim_passes,
        pim_latency=latency,
        operator_model_ns=pim_ops,
        cpu_only_model_ns=cpu_ops,
        wall_ns=wall,
    )
    logging_service.log_operation(
        "debug",
        "Query executed",
        query=q.id,
        operation="execute",
        pim_level=report.level,
        selectivity=report.pim_selectivity,
        rows=len(result),
        host_model_ns=cpu_cost_model(rows_gathered, bytes_per_row, cfg, probes, aggregate_rows),
    )
    return report


def run_query(q: QueryIR, db: Database, cfg: DramConfig, spec: PimLevelSpec) -> ExecutionReport:
    return execute(plan_query(q, db, spec), db, cfg)


def selectivity_sweep(
    cfg: DramConfig,
    spec: PimLevelSpec,
    selectivities: Sequence[float],
    rows: Optional[int] = None,
    width: int = 32,
    materialize: bool = False,
    seed: int = 7,
) -> List[SelectivityPoint]:
    """Modeled speedup of a single-column filter + gather + aggregate at controlled selectivities.

    Analytic by default; with ``materialize`` a shuffled synthetic column is
    filtered with ``value < threshold`` and the measured popcount is used.
    """
    validate_level_spec(cfg, spec)
    if materialize:
        rows = rows or MATERIALIZED_SWEEP_ROWS
        rng = np.random.default_rng(seed)
        column = pack_column(rng.permutation(rows), width)
    else:
        rows = rows or DEFAULT_SWEEP_ROWS
    column_bytes = -(-rows * width // 64) * 8

    points: List[SelectivityPoint] = []
    for selectivity in selectivities:
        if not 0.0 <= selectivity <= 1.0:
            raise ValidationFailure(f"selectivity must be in [0, 1] (got {selectivity})")
        threshold = int(round(selectivity * rows))
        if materialize:
            predicate = Predicate(op=CompareOp.LT, value=threshold)
            gathered = popcount(filter_column(column, compile_predicate(predicate, width)))
        else:
            gathered = threshold
        _, pim_ops, cpu_ops = model_times(cfg, spec, rows, [column_bytes], gathered, width / 8, 0, gathered)
        pim_total = sum(pim_ops.values())
        cpu_total = sum(cpu_ops.values())
        points.append(
            SelectivityPoint(
                selectivity=selectivity,
                rows=rows,
                rows_gathered=gathered,
                pim_model_ns=pim_total,
                cpu_only_model_ns=cpu_total,
                modeled_speedup=cpu_total / pim_total,
            )
        )
    logging_service.log_step("selectivity_sweep", True, pim_level=spec.label, points=len(points), materialize=materialize)
    return points
