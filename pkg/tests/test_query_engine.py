"""End-to-end query execution checked against the row-at-a-time reference interpreter."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pim_olap_sim.models.errors import AggregateOverflowError
from pim_olap_sim.models.hardware import PimLevel, PimLevelSpec
from pim_olap_sim.models.plans import DenormLevel
from pim_olap_sim.models.query import AggFunc, QueryIR
from pim_olap_sim.repositories import load_query
from pim_olap_sim.services.denormalizer import denormalize
from pim_olap_sim.services.executor import execute, pim_filter, run_query
from pim_olap_sim.services.filter_kernel import popcount
from pim_olap_sim.services.pim_timing import pim_level_grid
from pim_olap_sim.services.planner import plan_query, plan_summary
from pim_olap_sim.services.query_ops import group_aggregate, hash_join
from pim_olap_sim.services.reference import execute_reference

SSB_IDS = ["q1.1", "q1.2", "q1.3", "q2.1", "q2.2", "q2.3", "q3.1", "q3.2", "q3.3", "q3.4", "q4.1", "q4.2", "q4.3"]
TPCH_IDS = ["q1", "q3", "q6", "q7", "q10", "q12", "q14", "q19"]
GRID = pim_level_grid()
BANK_AB = PimLevelSpec(level=PimLevel.BANK_AB)
SALP_8 = PimLevelSpec(level=PimLevel.SUBARRAY, salp=8)


def ssb_query(**fields) -> QueryIR:
    body = {"id": "t", "table": "lineorder", "select": [{"name": "revenue", "agg": "sum", "expr": "lo_revenue"}]}
    body.update(fields)
    return QueryIR.model_validate(body)


@pytest.fixture(scope="module")
def ssb_references(ssb_db, ssb_workload):
    return {q.id: execute_reference(q, ssb_db) for q in ssb_workload}


@pytest.fixture(scope="module")
def ssb_denormalized(ssb_db, ssb_workload):
    """Widened database and rewritten queries per level."""
    result = {}
    for level in (DenormLevel.D1, DenormLevel.D2, DenormLevel.D3):
        _, widened, rewritten = denormalize(ssb_db, ssb_workload, level)
        result[level] = (widened, {q.id: q for q in rewritten})
    return result


class TestSsbEquivalence:
    """Every SSB query, denormalization level and PIM level gives the reference result."""

    @pytest.mark.parametrize("level", [DenormLevel.D1, DenormLevel.D2, DenormLevel.D3])
    @pytest.mark.parametrize("query_id", SSB_IDS)
    def test_matches_reference(self, cfg, ssb_denormalized, ssb_references, level, query_id):
        db, queries = ssb_denormalized[level]
        expected = ssb_references[query_id]

        for spec in GRID:
            report = run_query(queries[query_id], db, cfg, spec)
            assert report.result == expected, (query_id, level.value, spec.label)

    def test_references_are_not_trivial(self, ssb_references):
        assert len(ssb_references["q2.1"]) > 1
        assert ssb_references["q1.1"].rows[0][0] > 0


class TestTpchEquivalence:
    """TPC-H fixtures on a small hand-built database."""

    @pytest.mark.parametrize("query_id", TPCH_IDS)
    def test_matches_reference(self, cfg, tpch_db, query_id):
        query = load_query(query_id, "tpch")
        report = run_query(query, tpch_db, cfg, BANK_AB)

        assert report.result == execute_reference(query, tpch_db)

    def test_q10_with_residual_join(self, cfg, tpch_db):
        query = load_query("q10", "tpch")
        _, widened, (rewritten,) = denormalize(tpch_db, [query], DenormLevel.D3)

        report = run_query(rewritten, widened, cfg, SALP_8)

        assert rewritten.residual_joins
        assert report.result == execute_reference(query, tpch_db)
        assert report.result.columns[:2] == ["c_custkey", "c_name"]


class TestPlanning:
    """How the WHERE clause is split between PIM and host."""

    def test_conjunctive_numeric_where_runs_on_pim(self, ssb_db):
        plan = plan_query(load_query("q1.1"), ssb_db, BANK_AB)

        assert plan.cpu_predicates is None
        assert {p.column for p in plan.pim_predicates} == {"lo_discount", "lo_quantity"}
        assert list(plan.build_filters) == ["date"]
        assert plan_summary(plan)["joins"] == ["date"]

    def test_pim_predicates_ordered_by_selectivity(self, ssb_db):
        plan = plan_query(load_query("q1.1"), ssb_db, BANK_AB)
        estimates = [p.estimated_selectivity for p in plan.pim_predicates]

        assert estimates == sorted(estimates)

    def test_like_term_stays_on_host(self, cfg, ssb_db):
        query = ssb_query(
            where={"and": [
                {"col": "lo_shipmode", "like": "%AIR"},
                {"col": "lo_quantity", "op": "lt", "value": 10},
            ]}
        )
        plan = plan_query(query, ssb_db, BANK_AB)

        assert [p.column for p in plan.pim_predicates] == ["lo_quantity"]
        assert plan.cpu_predicates is not None
        assert execute(plan, ssb_db, cfg).result == execute_reference(query, ssb_db)

    def test_disjunction_uses_branch_bitmaps(self, cfg, ssb_db):
        a = {"col": "lo_discount", "op": "ge", "value": 5}
        query = ssb_query(
            where={"or": [
                {"and": [a, {"col": "lo_quantity", "op": "lt", "value": 10}]},
                {"and": [a, {"col": "lo_tax", "op": "eq", "value": 3}]},
            ]}
        )
        plan = plan_query(query, ssb_db, BANK_AB)
        report = execute(plan, ssb_db, cfg)

        assert len(plan.pim_disjunctions) == 1
        assert plan.pim_passes == 4
        assert report.pim_passes == 4
        assert report.result == execute_reference(query, ssb_db)

    def test_selectivity_independent_of_predicate_order(self, ssb_db):
        plan = plan_query(load_query("q1.2"), ssb_db, BANK_AB)
        reordered = plan.model_copy(update={"pim_predicates": list(reversed(plan.pim_predicates))})
        table = ssb_db.table("lineorder")

        forward = pim_filter(plan, table)
        backward = pim_filter(reordered, table)

        assert np.array_equal(forward.words, backward.words)
        assert popcount(forward) > 0


class TestExecutionReport:
    """Selectivity, gather counts and level independence."""

    def test_no_predicates_gathers_everything(self, cfg, ssb_db):
        report = run_query(ssb_query(), ssb_db, cfg, BANK_AB)
        rows = ssb_db.table("lineorder").row_count

        assert report.rows_gathered == rows
        assert report.pim_selectivity == 1.0
        assert report.pim_passes == 0
        assert report.pim_time_ns == 0.0

    def test_level_changes_time_not_result(self, cfg, ssb_db):
        query = load_query("q1.1")
        bank = run_query(query, ssb_db, cfg, BANK_AB)
        salp = run_query(query, ssb_db, cfg, SALP_8)

        assert bank.result == salp.result
        assert bank.pim_time_ns != salp.pim_time_ns
        assert bank.pim_selectivity == salp.pim_selectivity

    def test_selectivity_matches_gathered_rows(self, cfg, ssb_db):
        report = run_query(load_query("q1.1"), ssb_db, cfg, BANK_AB)

        assert 0.0 < report.pim_selectivity < 1.0
        assert report.pim_selectivity == report.rows_gathered / report.row_count
        assert report.modeled_speedup > 1.0

    def test_empty_selection(self, cfg, ssb_db):
        query = ssb_query(
            select=[
                {"name": "revenue", "agg": "sum", "expr": "lo_revenue"},
                {"name": "n", "agg": "count"},
            ],
            where={"col": "lo_quantity", "op": "gt", "value": 1000},
        )
        report = run_query(query, ssb_db, cfg, BANK_AB)

        assert report.result.rows == [[None, 0]]
        assert report.result == execute_reference(query, ssb_db)

    def test_overflow_is_reported(self, cfg, ssb_db):
        query = ssb_query(select=[{"name": "x", "agg": "sum", "expr": {"mul": ["lo_extendedprice", 1 << 62]}}])
        with pytest.raises(AggregateOverflowError):
            run_query(query, ssb_db, cfg, BANK_AB)


class TestHostOperators:
    """Hash join and grouping primitives."""

    def test_join_with_empty_build_side(self):
        keep, matched = hash_join(np.array([1, 2, 3]), np.array([], dtype=np.int64))
        assert keep.size == 0 and matched.size == 0

    def test_build_mask_drops_partners(self):
        keep, matched = hash_join(np.array([1, 2, 3, 2]), np.array([3, 2, 1]), np.array([True, False, True]))

        assert keep.tolist() == [0, 2]
        assert matched.tolist() == [2, 0]

    def test_single_group_equals_plain_aggregate(self):
        values = np.array([4, -2, 9, 1])
        aggregates = [(AggFunc.SUM, values), (AggFunc.MIN, values), (AggFunc.MAX, values), (AggFunc.COUNT, None)]

        keys, grouped, _ = group_aggregate([np.zeros(4, dtype=np.int64)], aggregates, size=4)
        _, plain, _ = group_aggregate([], aggregates, size=4)

        assert keys[0].tolist() == [0]
        assert grouped == plain == [[12], [-2], [9], [4]]

    def test_sum_overflow(self):
        values = np.array([(1 << 62), (1 << 62)], dtype=np.int64)
        with pytest.raises(AggregateOverflowError):
            group_aggregate([], [(AggFunc.SUM, values)], size=2)


@settings(max_examples=50)
@given(
    st.lists(st.integers(min_value=0, max_value=30), max_size=100),
    st.lists(st.integers(min_value=0, max_value=30), max_size=40, unique=True),
)
def test_hash_join_matches_nested_loop(probe, build):
    """Probe positions and partners agree with a nested-loop join on unique keys."""
    keep, matched = hash_join(np.array(probe, dtype=np.int64), np.array(build, dtype=np.int64))

    expected = [(i, j) for i, p in enumerate(probe) for j, b in enumerate(build) if p == b]
    assert list(zip(keep.tolist(), matched.tolist())) == expected
