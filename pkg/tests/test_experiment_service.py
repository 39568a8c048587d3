"""Tests for runs, sweeps, result matrices and reports."""

import math

import pandas as pd
import pytest

from pim_olap_sim.models.errors import ValidationFailure
from pim_olap_sim.models.hardware import PimLevel, PimLevelSpec, Placement
from pim_olap_sim.models.plans import DenormLevel
from pim_olap_sim.models.reports import SWEEP_COLUMNS, SweepSpec
from pim_olap_sim.repositories import FileStoreRepository
from pim_olap_sim.services import experiment_service
from pim_olap_sim.services.experiment_service import (
    ERROR_METRIC,
    GEOMEAN_QUERY,
    STORE_QUERY,
    ExperimentService,
    build_report,
    format_value,
    geomean,
    microbenchmark,
    parse_denorm,
    parse_levels,
    read_matrix,
    run_metrics,
    write_matrix,
    write_report,
)
from pim_olap_sim.services.pim_timing import pim_level_grid

GRID = SweepSpec(
    scale_factors=[0.01],
    denorm_levels=["D1", "D2"],
    pim_levels=["BankAB", "SALP-2"],
    queries=["q1.1", "q2.1", "q3.1"],
)


def test_geomean():
    assert geomean([1.0, 4.0, 16.0]) == pytest.approx(4.0)
    assert geomean([7.5]) == pytest.approx(7.5)


@pytest.mark.parametrize("values", [[], [1.0, 0.0], [2.0, -1.0]])
def test_geomean_rejects_bad_input(values):
    with pytest.raises(ValidationFailure):
        geomean(values)


@pytest.mark.parametrize(
    "value, text",
    [(3, "3"), (True, "1"), (0.1, "0.1"), (1 / 3, "0.3333333333"), (2e-7, "2e-07"), ("BankAB", "BankAB")],
)
def test_format_value(value, text):
    assert format_value(value) == text


class TestParsing:
    """Level labels from the command line."""

    def test_levels(self, cfg):
        specs = parse_levels(["BankAB", "rank", "SALP-4", "SALP-2-pess"], cfg)

        assert [s.label for s in specs] == ["BankAB", "Rank", "SALP-4", "SALP-2-pess"]
        assert specs[3].placement == Placement.PESSIMISTIC

    @pytest.mark.parametrize("label", ["Bank", "SALP-9", "SALP-16"])
    def test_invalid_levels(self, cfg, label):
        with pytest.raises(ValidationFailure):
            parse_levels([label], cfg)

    def test_denorm_levels(self):
        assert parse_denorm(["d1", "D4"]) == [DenormLevel.D1, DenormLevel.D4]
        with pytest.raises(ValidationFailure, match="denormalization"):
            parse_denorm(["D5"])


class TestExperimentService:
    """Runs and sweeps over a repository holding the SF 0.01 store."""

    @pytest.fixture(scope="class")
    def service(self, tmp_path_factory, ssb_db, cfg):
        repository = FileStoreRepository(tmp_path_factory.mktemp("stores"))
        repository.save(ExperimentService.store_name(0.01, 7), ssb_db, scale_factor=0.01, seed=7)
        return ExperimentService(repository, cfg)

    @pytest.fixture(scope="class")
    def result(self, service):
        return service.sweep(GRID)

    def test_store_is_reused(self, service):
        assert service.ensure_store(0.01, 7) == "ssb_sf0.01_seed7"
        assert service.repository.list_stores() == ["ssb_sf0.01_seed7"]

    def test_run(self, service, ssb_db):
        outcome = service.run(ssb_db, "q2.1", PimLevelSpec(level=PimLevel.BANK_AB), DenormLevel.D2)

        assert outcome.report.query == "q2.1"
        assert len(outcome.report.result) > 1
        assert outcome.cost.level == "BankAB"

    def test_run_unknown_query(self, service, ssb_db):
        with pytest.raises(ValidationFailure, match="no query"):
            service.run(ssb_db, "q9.9", PimLevelSpec(level=PimLevel.BANK_AB))

    def test_grid_rows(self, result):
        frame = result.to_frame()
        points = frame[~frame["query"].isin([GEOMEAN_QUERY, STORE_QUERY])]

        assert result.failures == 0
        assert list(frame.columns) == list(SWEEP_COLUMNS)
        assert set(points.groupby(["denorm", "level", "query"]).groups) == {
            (d, lvl, q) for d in ("D1", "D2") for lvl in ("BankAB", "SALP-2") for q in GRID.queries
        }
        assert (frame["query"] == GEOMEAN_QUERY).any()

    def test_grid_order(self, result):
        frame = result.to_frame()
        order = frame[["denorm", "level"]].drop_duplicates()

        assert list(order["denorm"]) == ["D1", "D1", "D1", "D2", "D2", "D2"]
        assert list(order["level"]) == ["", "BankAB", "SALP-2", "", "BankAB", "SALP-2"]

    def test_single_point_matches_run(self, service, result, ssb_db):
        spec = PimLevelSpec(level=PimLevel.SUBARRAY, salp=2)
        outcome = service.run(ssb_db, "q3.1", spec, DenormLevel.D2)
        expected = {name: format_value(value) for name, value in run_metrics(outcome.report, outcome.cost).items()}

        rows = [
            row for row in result.rows
            if row.denorm == "D2" and row.level == "SALP-2" and row.query == "q3.1"
        ]

        assert {row.metric: row.value for row in rows} == expected

    def test_memory_overhead_rows(self, result):
        stores = {row.denorm: row.value for row in result.rows if row.query == STORE_QUERY and row.metric == "memory_overhead"}

        assert float(stores["D1"]) == 0.0
        assert float(stores["D2"]) > 0.0

    def test_sweep_is_deterministic(self, service, result):
        again = service.sweep(GRID)
        assert again.to_frame().equals(result.to_frame())

    def test_missing_store_becomes_error_rows(self, service):
        spec = GRID.model_copy(update={"denorm_levels": ["D1"], "pim_levels": ["BankAB"]})

        failed = service.sweep(spec, store="ghost")

        errors = [row for row in failed.rows if row.metric == ERROR_METRIC]
        assert failed.failures == len(errors) == 1 + len(GRID.queries)
        assert {row.value for row in errors} == {"store_format"}

    def test_unexpected_failure_is_recorded_and_sweep_continues(self, service, monkeypatch):
        original = experiment_service.run_query

        def run_query(query, db, cfg, spec):
            if query.id == "q1.1":
                raise ZeroDivisionError("boom")
            return original(query, db, cfg, spec)

        monkeypatch.setattr(experiment_service, "run_query", run_query)
        spec = GRID.model_copy(update={"denorm_levels": ["D1"], "pim_levels": ["BankAB"]})

        result = service.sweep(spec)

        errors = [row for row in result.rows if row.metric == ERROR_METRIC]
        assert result.failures == 1
        assert [(row.query, row.value) for row in errors] == [("q1.1", "internal")]
        assert {row.query for row in result.rows if row.metric == "modeled_speedup"} >= {"q2.1", "q3.1"}

    def test_unknown_query_rejected(self, service):
        with pytest.raises(ValidationFailure, match="unknown queries"):
            service.sweep(GRID.model_copy(update={"queries": ["q9.9"]}))

    def test_other_workload_needs_a_store(self, service):
        with pytest.raises(ValidationFailure, match="store"):
            service.sweep(SweepSpec(workload="tpch"))

    def test_matrix_files(self, result, tmp_path):
        csv_path, json_path = write_matrix(result, tmp_path / "out")

        matrix = read_matrix(csv_path)

        assert json_path.is_file()
        assert len(matrix) == len(result.rows)
        assert list(matrix.columns) == list(SWEEP_COLUMNS)
        assert set(matrix["level"]) == {"", "BankAB", "SALP-2"}

    def test_report_tables(self, result, tmp_path):
        csv_path, _ = write_matrix(result, tmp_path)
        tables = build_report(read_matrix(csv_path))

        shares = tables["operator_breakdown"]
        totals = shares.groupby(["scale_factor", "denorm", "level", "query"])["percent"].sum()
        assert all(math.isclose(total, 100.0) for total in totals)

        speedup = tables["speedup_vs_selectivity"]
        assert len(speedup) == 12
        assert (speedup["modeled_speedup"] > 0).all()

        hardware = tables["overhead_by_level"].set_index("level")
        assert hardware.loc["SALP-2", "area_overhead"] > hardware.loc["BankAB", "area_overhead"]

        storage = tables["storage_by_denorm"].set_index("denorm")
        assert storage.loc["D1", "memory_overhead"] == 0.0

        paths = write_report(tables, tmp_path / "report")
        assert sorted(p.name for p in paths) == [
            "operator_breakdown.csv",
            "overhead_by_level.csv",
            "speedup_vs_selectivity.csv",
            "storage_by_denorm.csv",
        ]


class TestReadMatrix:
    def test_missing(self, tmp_path):
        with pytest.raises(ValidationFailure, match="not found"):
            read_matrix(tmp_path / "absent.csv")

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "other.csv"
        pd.DataFrame({"a": [1]}).to_csv(path, index=False)

        with pytest.raises(ValidationFailure, match="columns"):
            read_matrix(path)

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")

        with pytest.raises(ValidationFailure, match="empty"):
            read_matrix(path)


def test_microbenchmark_table(cfg):
    table = microbenchmark(cfg)

    assert list(table["level"]) == [spec.label for spec in pim_level_grid()]
    assert (table["total_ms"] > table["filter_ms"]).all()
    assert table["mode_switch_ms"].tolist() == pytest.approx([0.004] * len(table))
