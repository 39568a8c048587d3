"""Workload-driven denormalization into a widetable.

Levels:

* D1: no denormalization.
* D2: every dimension column used in a WHERE clause of the workload.
* D3: D2 plus dimension columns in SELECT or GROUP BY, except columns that
  appear only in SELECT and are determined by a grouped dimension key; those
  are fetched after aggregation by a residual join.
* D4: every column of every dimension reachable from the fact table.

A directly referenced dimension's primary key is never folded: the fact
table's foreign key already holds it.
"""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import DanglingForeignKeyError, SchemaError
from pim_olap_sim.models.plans import DenormLevel, DenormPlan, FoldEntry
from pim_olap_sim.models.query import ColumnRef, QueryIR, ResidualJoin
from pim_olap_sim.models.schema import ColumnDef, Schema, TableDef
from pim_olap_sim.models.store import Database, Table
from pim_olap_sim.services.columnar_store import column_values, encode_values
from pim_olap_sim.services.query_binding import DEFAULT_MAX_CHAIN, BoundQuery, bind_query, map_query_refs

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

FoldKey = Tuple[Tuple[str, ...], str, str]


def _is_direct_key(bq: BoundQuery, ref: ColumnRef) -> bool:
    return len(bq.paths[ref.alias]) == 1 and ref.column == bq.primary_key(ref.alias)


def _fold_key(bq: BoundQuery, ref: ColumnRef) -> FoldKey:
    return (bq.paths[ref.alias], bq.tables[ref.alias], ref.column)


def _is_dimension(bq: BoundQuery, ref: ColumnRef) -> bool:
    return ref.alias != bq.fact and ref.alias not in bq.residual_aliases


def _select_only_determined(bq: BoundQuery) -> Set[ColumnRef]:
    """Dimension columns that appear only as plain SELECT items and are fixed by a grouped key."""
    q = bq.query
    if not q.is_aggregate:
        return set()
    elsewhere: Set[ColumnRef] = set(q.group_by)
    if q.where is not None:
        elsewhere.update(q.where.columns())
    plain: Set[ColumnRef] = set()
    for item in q.select:
        if item.expr is None:
            continue
        if item.agg is None and item.expr.kind == "col":
            plain.add(item.expr.column)
        else:
            elsewhere.update(item.expr.columns())
    return {
        ref for ref in plain
        if ref not in elsewhere and _is_dimension(bq, ref) and bq.determining_key(ref.alias) is not None
    }


def reachable_dimensions(schema: Schema, fact: str, max_chain: int = DEFAULT_MAX_CHAIN) -> List[Tuple[Tuple[str, ...], str]]:
    """(FK path, table) for every dimension reachable within ``max_chain`` hops past the direct FK.

    Raises:
        SchemaError: the foreign keys form a cycle
    """
    found: List[Tuple[Tuple[str, ...], str]] = []

    def walk(table: str, path: Tuple[str, ...], chain: Tuple[str, ...]) -> None:
        for fk in schema.table(table).foreign_keys:
            if fk.table in chain:
                raise SchemaError(f"FK cycle through {fk.table}", {"path": list(path + (fk.column,))})
            next_path = path + (fk.column,)
            if len(next_path) - 1 > max_chain:
                continue
            found.append((next_path, fk.table))
            walk(fk.table, next_path, chain + (fk.table,))

    walk(fact, (), (fact,))
    return found


def _fold_entries(keys: Iterable[FoldKey], schema: Schema, fact: TableDef) -> List[FoldEntry]:
    def order(key: FoldKey) -> Tuple:
        path, table, column = key
        names = [c.name for c in schema.table(table).columns]
        return (path, names.index(column))

    ordered = sorted(set(keys), key=order)
    counts = Counter(column for _, _, column in ordered)
    fact_names = {c.name for c in fact.columns}
    entries = []
    for path, table, column in ordered:
        name = column
        if counts[column] > 1 or column in fact_names:
            name = "__".join(path + (column,))
        entries.append(FoldEntry(path=path, table=table, column=column, name=name))
    return entries


def _widetable(schema: Schema, fact: TableDef, entries: Sequence[FoldEntry]) -> TableDef:
    folded: List[ColumnDef] = []
    for entry in entries:
        source = schema.table(entry.table).column(entry.column)
        folded.append(ColumnDef(name=entry.name, type=source.type, scale=source.scale))
    return TableDef(
        name=fact.name,
        columns=list(fact.columns) + folded,
        primary_key=list(fact.primary_key),
        foreign_keys=list(fact.foreign_keys),
    )


def _redirect(bq: BoundQuery, fold: Dict[Tuple[Tuple[str, ...], str], FoldEntry], removed: Set[str], skip: Set[ColumnRef]):
    def redirect(ref: ColumnRef) -> ColumnRef:
        if ref.alias == bq.fact or ref.alias not in removed or ref in skip:
            return ref
        if _is_direct_key(bq, ref):
            return ColumnRef(alias=bq.fact, column=bq.join_for(ref.alias).fk)
        return ColumnRef(alias=bq.fact, column=fold[(bq.paths[ref.alias], ref.column)].name)

    return redirect


def analyze_workload(
    queries: Sequence[QueryIR],
    schema: Schema,
    level: DenormLevel,
    max_chain: int = DEFAULT_MAX_CHAIN,
) -> DenormPlan:
    """Decide which dimension columns to fold for ``level``.

    Args:
        queries: Workload; every query must target the same fact table
        schema: Schema the queries are written against
        level: Denormalization level
        max_chain: Maximum FK hops past the fact table's direct foreign key

    Returns:
        DenormPlan with the fold entries, widetable definition and residual joins

    Raises:
        UnknownColumnError: If a query references a missing column
        SchemaError: If joins cycle, are too deep or queries target different fact tables
    """
    level = DenormLevel(level)
    fact_name = schema.fact_table or (queries[0].table if queries else None)
    if fact_name is None:
        raise SchemaError("schema has no fact table and the workload is empty")
    fact = schema.table(fact_name)
    bound = [bind_query(q, schema, max_chain) for q in queries]
    for bq in bound:
        if bq.fact != fact_name:
            raise SchemaError(f"query {bq.query.id} targets {bq.fact}, not the fact table {fact_name}")

    keys: Set[FoldKey] = set()
    excluded: Dict[str, Set[ColumnRef]] = {}
    if level.rank >= 2:
        for bq in bound:
            if bq.query.where is None:
                continue
            keys.update(
                _fold_key(bq, ref) for ref in bq.query.where.columns()
                if _is_dimension(bq, ref) and not _is_direct_key(bq, ref)
            )
    if level.rank >= 3:
        for bq in bound:
            determined = _select_only_determined(bq)
            excluded[bq.query.id] = determined
            keys.update(
                _fold_key(bq, ref) for ref in bq.query.referenced_columns()
                if _is_dimension(bq, ref) and not _is_direct_key(bq, ref) and ref not in determined
            )
    if level.rank >= 4:
        for path, table in reachable_dimensions(schema, fact_name, max_chain):
            definition = schema.table(table)
            keys.update(
                (path, table, c.name) for c in definition.columns
                if not (len(path) == 1 and c.name in definition.primary_key)
            )

    entries = _fold_entries(keys, schema, fact)
    residual_joins: Dict[str, List[ResidualJoin]] = {}
    if level == DenormLevel.D3:
        fold = {entry.key: entry for entry in entries}
        for bq in bound:
            pending: Dict[str, List[str]] = {}
            for ref in sorted(excluded.get(bq.query.id, set()), key=str):
                if (bq.paths[ref.alias], ref.column) not in fold:
                    pending.setdefault(ref.alias, []).append(ref.column)
            joins = []
            for alias, columns in pending.items():
                key = bq.determining_key(alias)
                redirect = _redirect(bq, fold, {key.alias, alias}, set())
                joins.append(
                    ResidualJoin(alias=alias, table=bq.tables[alias], key=redirect(key), columns=columns)
                )
            if joins:
                residual_joins[bq.query.id] = joins

    plan = DenormPlan(
        level=level,
        fact_table=fact_name,
        fold=entries,
        widetable=_widetable(schema, fact, entries),
        residual_joins=residual_joins,
    )
    logging_service.log_step(
        "analyze_workload",
        True,
        denorm=level.value,
        queries=len(queries),
        folded=len(entries),
        residual_joins=sum(len(j) for j in residual_joins.values()),
    )
    return plan


def _path_rows(db: Database, fact: str, path: Tuple[str, ...], cache: Dict[Tuple[str, ...], Tuple[str, np.ndarray]]) -> Tuple[str, np.ndarray]:
    """Table reached by ``path`` and the matching row of it for every fact row."""
    if path in cache:
        return cache[path]
    if not path:
        result = (fact, np.arange(db.table(fact).row_count))
    else:
        source, rows = _path_rows(db, fact, path[:-1], cache)
        fk = db.catalog.table(source).foreign_key(path[-1])
        target = db.table(fk.table)
        pk = column_values(target.columns[db.catalog.table(fk.table).primary_key[0]])
        probe = column_values(db.table(source).columns[path[-1]], rows)
        order = np.argsort(pk, kind="stable")
        ordered = pk[order]
        slots = np.minimum(np.searchsorted(ordered, probe), max(pk.size - 1, 0))
        found = ordered[slots] == probe if pk.size else np.zeros(probe.size, dtype=bool)
        if not found.all():
            missing = probe[~found][0]
            raise DanglingForeignKeyError(
                f"{source}.{path[-1]} value {missing} has no row in {fk.table}",
                {"table": fk.table, "value": int(missing)},
            )
        result = (fk.table, order[slots])
    cache[path] = result
    return result


def build_widetable(db: Database, plan: DenormPlan) -> Database:
    """Fold the plan's dimension columns into the fact table; dimension tables are kept.

    Raises:
        DanglingForeignKeyError: If a foreign key has no matching dimension row
    """
    if not plan.fold:
        return db
    fact = db.table(plan.fact_table)
    cache: Dict[Tuple[str, ...], Tuple[str, np.ndarray]] = {}
    columns = dict(fact.columns)
    try:
        for entry in plan.fold:
            table, rows = _path_rows(db, plan.fact_table, entry.path, cache)
            values = column_values(db.table(table).columns[entry.column], rows)
            source = db.catalog.table(table).column(entry.column)
            columns[entry.name] = encode_values(
                ColumnDef(name=entry.name, type=source.type, scale=source.scale), values
            )
    except DanglingForeignKeyError as e:
        logging_service.log_error("Widetable build failed", e, operation="build_widetable", denorm=plan.level.value)
        raise

    tables = dict(db.tables)
    tables[plan.fact_table] = Table(name=plan.fact_table, row_count=fact.row_count, columns=columns)
    widened = Database(catalog=db.catalog.with_table(plan.widetable), tables=tables)
    logging_service.log_step(
        "build_widetable",
        True,
        denorm=plan.level.value,
        columns=len(plan.fold),
        encoded_bytes=widened.encoded_bytes(),
    )
    return widened


def rewrite_query(q: QueryIR, plan: DenormPlan, schema: Schema, max_chain: int = DEFAULT_MAX_CHAIN) -> QueryIR:
    """Replace joins whose needed columns are all folded by references to widetable columns.

    Joins still needed by an unfolded column stay, together with every join
    on their path. Under D3, select-only determined columns become residual
    joins. A query that nothing applies to is returned unchanged.
    """
    if not plan.fold or q.table != plan.fact_table:
        return q
    bq = bind_query(q, schema, max_chain)
    bound = bq.query
    residual = plan.residual_joins.get(q.id, [])
    residual_refs = {ColumnRef(alias=rj.alias, column=c) for rj in residual for c in rj.columns}
    fold = {entry.key: entry for entry in plan.fold}

    needed: Dict[str, Set[str]] = {}
    for ref in bound.referenced_columns():
        if _is_dimension(bq, ref) and ref not in residual_refs:
            needed.setdefault(ref.alias, set()).add(ref.column)

    keep: Set[str] = set()
    for join in bound.joins:
        alias = join.alias
        covered = all(
            _is_direct_key(bq, ColumnRef(alias=alias, column=c)) or (bq.paths[alias], c) in fold
            for c in needed.get(alias, set())
        )
        if not covered:
            keep.add(alias)
            source: Optional[str] = join.source
            while source is not None and source != bq.fact:
                keep.add(source)
                source = bq.join_for(source).source
    removed = {j.alias for j in bound.joins} - keep
    if not removed and not residual:
        return q

    rewritten = map_query_refs(bound, _redirect(bq, fold, removed, residual_refs))
    group_by = list(rewritten.group_by)
    if rewritten.is_aggregate:
        for item in rewritten.select:
            ref = item.expr.column if item.agg is None and item.expr is not None else None
            # determined columns that landed in the widetable become grouping columns
            if ref is not None and ref.alias == bq.fact and ref not in group_by:
                original = next(i for i in bound.select if i.name == item.name).expr.column
                if original.alias != bq.fact:
                    group_by.append(ref)
    result = rewritten.model_copy(
        update={
            "joins": [j for j in bound.joins if j.alias in keep],
            "group_by": group_by,
            "residual_joins": list(residual),
        }
    )
    logger.debug(
        "Query rewritten",
        extra={"query": q.id, "removed_joins": sorted(removed), "residual_joins": len(residual)},
    )
    return result


def rewrite_workload(queries: Sequence[QueryIR], plan: DenormPlan, schema: Schema, max_chain: int = DEFAULT_MAX_CHAIN) -> List[QueryIR]:
    return [rewrite_query(q, plan, schema, max_chain) for q in queries]


def memory_overhead(original: Database, denorm: Database) -> float:
    """Relative growth of the encoded size."""
    base = original.encoded_bytes()
    if base == 0:
        return 0.0
    return (denorm.encoded_bytes() - base) / base


def denormalize(
    db: Database,
    queries: Sequence[QueryIR],
    level: DenormLevel,
    max_chain: int = DEFAULT_MAX_CHAIN,
) -> Tuple[DenormPlan, Database, List[QueryIR]]:
    """Analyze, build the widetable and rewrite the workload in one step."""
    plan = analyze_workload(queries, db.catalog, level, max_chain)
    widened = build_widetable(db, plan)
    return plan, widened, rewrite_workload(queries, plan, db.catalog, max_chain)


def plan_report(plan: DenormPlan, overhead: Optional[float] = None) -> Dict[str, object]:
    """Fold set, widetable columns and residual joins of a plan."""
    return {
        "level": plan.level.value,
        "fact_table": plan.fact_table,
        "folded_columns": [
            {"table": e.table, "column": e.column, "path": list(e.path), "name": e.name} for e in plan.fold
        ],
        "widetable_columns": len(plan.widetable.columns),
        "residual_joins": {
            query: [rj.model_dump(mode="json") for rj in joins] for query, joins in sorted(plan.residual_joins.items())
        },
        "memory_overhead": overhead,
    }
