"""Host-side relational operators over decoded column values."""

import logging
import re
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pim_olap_sim.models.errors import AggregateOverflowError, ValidationFailure
from pim_olap_sim.models.kernel import CompareOp
from pim_olap_sim.models.query import AggFunc, BoolExpr, ColumnRef, OrderKey, ValueExpr
from pim_olap_sim.models.reports import ResultTable
from pim_olap_sim.models.schema import ColumnDef
from pim_olap_sim.services.columnar_store import coerce_literal

logger = logging.getLogger(__name__)

INT64_LIMIT = float(2 ** 63)

Fetch = Callable[[ColumnRef], np.ndarray]
DefinitionOf = Callable[[ColumnRef], ColumnDef]


@lru_cache(maxsize=256)
def like_to_regex(pattern: str) -> "re.Pattern[str]":
    """SQL LIKE pattern (``%`` any run, ``_`` one character) as an anchored regex."""
    parts = []
    for char in pattern:
        if char == "%":
            parts.append(".*")
        elif char == "_":
            parts.append(".")
        else:
            parts.append(re.escape(char))
    return re.compile("".join(parts), re.DOTALL)


def literal_for(expr: BoolExpr, definition: ColumnDef) -> Tuple[Any, Any]:
    """Comparison operands in the column's logical value domain.

    Raises:
        ValidationFailure: a literal does not fit the column type
    """
    try:
        low = coerce_literal(expr.value, definition)
        high = coerce_literal(expr.high, definition) if expr.high is not None else None
    except (ValueError, TypeError) as e:
        raise ValidationFailure(
            f"literal {expr.value!r} does not fit column {definition.name} ({definition.type.value})"
        ) from e
    return low, high


def compare(values: np.ndarray, op: CompareOp, low: Any, high: Any = None) -> np.ndarray:
    if op == CompareOp.EQ:
        return values == low
    if op == CompareOp.NEQ:
        return values != low
    if op == CompareOp.LT:
        return values < low
    if op == CompareOp.LE:
        return values <= low
    if op == CompareOp.GT:
        return values > low
    if op == CompareOp.GE:
        return values >= low
    return (values >= low) & (values <= high)


def eval_bool_expr(expr: BoolExpr, fetch: Fetch, definition_of: DefinitionOf, size: int) -> np.ndarray:
    """Vectorized WHERE evaluation; ``fetch`` returns the decoded values of a column."""
    if expr.kind == "and":
        result = np.ones(size, dtype=bool)
        for child in expr.children:
            result &= eval_bool_expr(child, fetch, definition_of, size)
        return result
    if expr.kind == "or":
        result = np.zeros(size, dtype=bool)
        for child in expr.children:
            result |= eval_bool_expr(child, fetch, definition_of, size)
        return result

    values = fetch(expr.column)
    if expr.kind == "like":
        regex = like_to_regex(expr.pattern)
        return np.fromiter((regex.fullmatch(str(v)) is not None for v in values.tolist()), dtype=bool, count=size)
    low, high = literal_for(expr, definition_of(expr.column))
    return np.asarray(compare(values, expr.op, low, high), dtype=bool).reshape(size)


def eval_value_expr(expr: ValueExpr, fetch: Fetch, size: int) -> np.ndarray:
    """Vectorized integer arithmetic; a float64 shadow detects int64 overflow.

    Raises:
        AggregateOverflowError: an intermediate value leaves the int64 range
    """
    if expr.kind == "col":
        return fetch(expr.column)
    if expr.kind == "const":
        return np.full(size, expr.value, dtype=np.int64)

    left = eval_value_expr(expr.args[0], fetch, size).astype(np.int64)
    right = eval_value_expr(expr.args[1], fetch, size).astype(np.int64)
    if expr.kind == "add":
        shadow, exact = left.astype(np.float64) + right.astype(np.float64), left + right
    elif expr.kind == "sub":
        shadow, exact = left.astype(np.float64) - right.astype(np.float64), left - right
    else:
        shadow, exact = left.astype(np.float64) * right.astype(np.float64), left * right
    if shadow.size and np.abs(shadow).max() >= INT64_LIMIT:
        raise AggregateOverflowError(f"{expr.kind} overflows 64-bit integers")
    return exact


def hash_join(probe_keys: np.ndarray, build_keys: np.ndarray, build_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Equality join of a probe column against a unique build key column.

    Returns positions into the probe side and the matching build-side rows;
    probe rows without a (surviving) partner are dropped.
    """
    build_rows = np.arange(build_keys.size) if build_mask is None else np.flatnonzero(build_mask)
    table: Dict[Any, int] = dict(zip(build_keys[build_rows].tolist(), build_rows.tolist()))
    matched = np.fromiter((table.get(k, -1) for k in probe_keys.tolist()), dtype=np.int64, count=probe_keys.size)
    keep = np.flatnonzero(matched >= 0)
    return keep, matched[keep]


def _group_ids(keys: Sequence[np.ndarray], size: int) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Dense group id per row and the key values of every group."""
    if not keys:
        return np.zeros(size, dtype=np.int64), []
    codes = []
    uniques = []
    for key in keys:
        unique, inverse = np.unique(key, return_inverse=True)
        uniques.append(unique)
        codes.append(inverse.reshape(-1))
    stacked = np.stack(codes, axis=1)
    groups, inverse = np.unique(stacked, axis=0, return_inverse=True)
    group_keys = [uniques[i][groups[:, i]] for i in range(len(keys))]
    return inverse.reshape(-1), group_keys


def _check_sum(values: np.ndarray, groups: np.ndarray, count: int) -> None:
    magnitude = np.zeros(count, dtype=np.float64)
    np.add.at(magnitude, groups, np.abs(values.astype(np.float64)))
    if magnitude.size and magnitude.max() >= INT64_LIMIT:
        raise AggregateOverflowError("SUM exceeds the 64-bit accumulator")


def group_aggregate(
    keys: Sequence[np.ndarray],
    aggregates: Sequence[Tuple[AggFunc, Optional[np.ndarray]]],
    carried: Sequence[np.ndarray] = (),
    size: int = 0,
) -> Tuple[List[np.ndarray], List[List[Any]], List[np.ndarray]]:
    """GROUP BY ``keys`` computing ``aggregates``.

    ``carried`` columns are functionally determined by the keys; each group
    takes the value of its first row. With no keys, an empty input still
    yields one group (SUM/MIN/MAX None, COUNT 0).

    Returns:
        (group key columns, aggregate columns as Python lists, carried columns)

    Raises:
        AggregateOverflowError: a SUM leaves the int64 range
    """
    groups, group_keys = _group_ids(keys, size)
    count = len(group_keys[0]) if keys else 1
    empty_global = not keys and size == 0

    first_rows = np.full(count, -1, dtype=np.int64)
    if size:
        order = np.arange(size - 1, -1, -1)
        first_rows[groups[order]] = order

    results: List[List[Any]] = []
    for func, values in aggregates:
        if func == AggFunc.COUNT:
            results.append(np.bincount(groups, minlength=count).astype(np.int64).tolist() if size else [0] * count)
            continue
        if empty_global:
            results.append([None])
            continue
        values = np.asarray(values, dtype=np.int64)
        if func == AggFunc.SUM:
            _check_sum(values, groups, count)
            acc = np.zeros(count, dtype=np.int64)
            np.add.at(acc, groups, values)
        elif func == AggFunc.MIN:
            acc = np.full(count, np.iinfo(np.int64).max, dtype=np.int64)
            np.minimum.at(acc, groups, values)
        else:
            acc = np.full(count, np.iinfo(np.int64).min, dtype=np.int64)
            np.maximum.at(acc, groups, values)
        results.append(acc.tolist())

    carried_out = [np.asarray(column)[first_rows] for column in carried]
    return group_keys, results, carried_out


def _sort_value(value: Any) -> Tuple[bool, Any]:
    return (value is None, value if value is not None else 0)


def finalize(columns: List[str], rows: List[List[Any]], order_by: Sequence[OrderKey], limit: Optional[int]) -> ResultTable:
    """Canonical row order (all columns ascending), then ORDER BY, then LIMIT."""
    ordered = sorted(rows, key=lambda row: tuple(_sort_value(v) for v in row))
    positions = {name: i for i, name in enumerate(columns)}
    for key in reversed(list(order_by)):
        index = positions[key.name]
        ordered.sort(key=lambda row: _sort_value(row[index]), reverse=key.desc)
    if limit is not None:
        ordered = ordered[:limit]
    return ResultTable(columns=list(columns), rows=ordered)


def to_python(value: Any) -> Any:
    """Plain Python scalar for a numpy value."""
    return value.item() if isinstance(value, np.generic) else value
