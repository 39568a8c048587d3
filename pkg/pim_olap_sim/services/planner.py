"""Physical planning: which predicates run on the PIM filter and which on the host."""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import UnknownColumnError
from pim_olap_sim.models.hardware import PimLevelSpec
from pim_olap_sim.models.kernel import CompareOp, Predicate
from pim_olap_sim.models.plans import PhysicalPlan, PimPredicate, PimTree
from pim_olap_sim.models.query import BoolExpr, QueryIR
from pim_olap_sim.models.store import Database, EncodedColumn
from pim_olap_sim.services.query_binding import BoundQuery, bind_query
from pim_olap_sim.services.query_ops import literal_for

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)


def _interval_predicate(low: int, high: int, max_code: int, column_id: str) -> Predicate:
    """Smallest comparator for the code interval ``[low, high]`` within ``[0, max_code]``."""
    low, high = max(low, 0), min(high, max_code)
    if low > high:
        return Predicate.always_false(column_id)
    if low == 0 and high == max_code:
        return Predicate.always_true(column_id)
    if low == high:
        return Predicate(op=CompareOp.EQ, value=low, column_id=column_id)
    if low == 0:
        return Predicate(op=CompareOp.LE, value=high, column_id=column_id)
    if high == max_code:
        return Predicate(op=CompareOp.GE, value=low, column_id=column_id)
    return Predicate(op=CompareOp.BETWEEN, value=low, high=high, column_id=column_id)


def _code_bounds(column: EncodedColumn, value) -> Tuple[int, int, bool]:
    """Left/right insertion points of ``value`` in code space and whether it is present."""
    if column.dictionary is None:
        return value, value + 1, 0 <= value <= column.max_code
    values = column.dictionary.values
    left = int(np.searchsorted(values, value, side="left"))
    right = int(np.searchsorted(values, value, side="right"))
    return left, right, right > left


def translate_predicate(term: BoolExpr, column: EncodedColumn) -> Predicate:
    """Map a comparison on logical values onto an equivalent comparison on codes.

    Codes are order preserving, so every range maps to a code interval;
    values absent from a dictionary make equality always false.
    """
    low_value, high_value = literal_for(term, column.definition)
    column_id = column.name
    max_code = column.max_code if column.dictionary is None else max(column.dictionary.size - 1, 0)
    left, right, present = _code_bounds(column, low_value)

    if term.op == CompareOp.NEQ:
        if not present:
            return Predicate.always_true(column_id)
        return Predicate(op=CompareOp.NEQ, value=left, column_id=column_id)
    if term.op == CompareOp.EQ:
        return _interval_predicate(left, right - 1, max_code, column_id)
    if term.op == CompareOp.LT:
        return _interval_predicate(0, left - 1, max_code, column_id)
    if term.op == CompareOp.LE:
        return _interval_predicate(0, right - 1, max_code, column_id)
    if term.op == CompareOp.GT:
        return _interval_predicate(right, max_code, max_code, column_id)
    if term.op == CompareOp.GE:
        return _interval_predicate(left, max_code, max_code, column_id)
    _, high_right, _ = _code_bounds(column, high_value)
    return _interval_predicate(left, high_right - 1, max_code, column_id)


def estimate_selectivity(predicate: Predicate, column: EncodedColumn) -> float:
    """Fraction of the code domain the predicate accepts (uniform codes assumed)."""
    domain = (column.max_code if column.dictionary is None else max(column.dictionary.size - 1, 0)) + 1
    op = predicate.op
    if op == CompareOp.EQ:
        accepted = 1
    elif op == CompareOp.NEQ:
        accepted = domain - 1
    elif op == CompareOp.LT:
        accepted = predicate.value
    elif op == CompareOp.LE:
        accepted = predicate.value + 1
    elif op == CompareOp.GT:
        accepted = domain - predicate.value - 1
    elif op == CompareOp.GE:
        accepted = domain - predicate.value
    else:
        accepted = predicate.high - predicate.value + 1
    return min(max(accepted / domain, 0.0), 1.0)


def _pim_eligible(term: BoolExpr, fact: str) -> bool:
    if term.kind == "like":
        return False
    if term.kind == "cmp":
        return term.column.alias == fact
    return all(_pim_eligible(child, fact) for child in term.children)


def _pim_leaf(term: BoolExpr, bq: BoundQuery, db: Database) -> PimPredicate:
    column = db.table(bq.fact).columns.get(term.column.column)
    if column is None:
        raise UnknownColumnError(f"column {term.column} is not stored in {bq.fact}")
    predicate = translate_predicate(term, column)
    return PimPredicate(
        column=column.name,
        predicate=predicate,
        estimated_selectivity=estimate_selectivity(predicate, column),
    )


def _pim_tree(term: BoolExpr, bq: BoundQuery, db: Database) -> PimTree:
    if term.kind == "cmp":
        return PimTree(kind="leaf", leaf=_pim_leaf(term, bq, db))
    return PimTree(kind=term.kind, children=[_pim_tree(child, bq, db) for child in term.children])


def plan_query(q: QueryIR, db: Database, spec: PimLevelSpec) -> PhysicalPlan:
    """Split the WHERE clause between the PIM filter and the host.

    Top-level fact-table comparisons become PIM predicates, ordered by
    ascending estimated selectivity. Fact-only AND/OR subtrees become PIM
    disjunction trees. Terms on a single dimension alias filter that
    dimension's hash-join build side; everything else (LIKE, terms spanning
    several tables) is a residual host predicate.

    Raises:
        UnknownColumnError: If the query references a missing column
    """
    try:
        bq = bind_query(q, db.catalog)
    except Exception as e:
        logging_service.log_error("Query binding failed", e, query=q.id, operation="plan_query")
        raise

    pim: List[PimPredicate] = []
    trees: List[PimTree] = []
    build: Dict[str, List[BoolExpr]] = {}
    residual: List[BoolExpr] = []

    conjuncts = bq.query.where.conjuncts() if bq.query.where is not None else []
    for term in conjuncts:
        aliases = term.aliases()
        if _pim_eligible(term, bq.fact):
            if term.kind == "cmp":
                pim.append(_pim_leaf(term, bq, db))
            else:
                trees.append(_pim_tree(term, bq, db))
        elif len(aliases) == 1 and bq.fact not in aliases:
            build.setdefault(next(iter(aliases)), []).append(term)
        else:
            residual.append(term)

    pim.sort(key=lambda p: p.estimated_selectivity)
    plan = PhysicalPlan(
        query=bq.query,
        spec=spec,
        target_table=bq.fact,
        pim_predicates=pim,
        pim_disjunctions=trees,
        build_filters={alias: BoolExpr.conjunction(terms) for alias, terms in build.items()},
        cpu_predicates=BoolExpr.conjunction(residual),
        joins=list(bq.query.joins),
        residual_joins=list(bq.query.residual_joins),
    )
    logging_service.log_operation(
        "debug",
        "Query planned",
        query=q.id,
        operation="plan_query",
        pim_passes=plan.pim_passes,
        build_filters=sorted(plan.build_filters),
        residual=plan.cpu_predicates is not None,
    )
    return plan


def plan_summary(plan: PhysicalPlan) -> Dict[str, Optional[object]]:
    """Readable split of a plan for reports."""
    return {
        "pim_predicates": [f"{p.column} {p.predicate.op.value} {p.predicate.value}" for p in plan.pim_predicates],
        "pim_disjunctions": len(plan.pim_disjunctions),
        "build_filters": sorted(plan.build_filters),
        "cpu_predicates": plan.cpu_predicates is not None,
        "joins": [j.alias for j in plan.joins],
    }
