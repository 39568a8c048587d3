"""Experiment orchestration: single runs, design-space sweeps, the microbenchmark and reports."""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from pim_olap_sim.config.logging import LoggingService, get_run_id, set_run_id
from pim_olap_sim.models.errors import PimSimError, ValidationFailure
from pim_olap_sim.models.hardware import DramConfig, PimLevel, PimLevelSpec
from pim_olap_sim.models.plans import DenormLevel, DenormPlan
from pim_olap_sim.models.query import QueryIR
from pim_olap_sim.models.reports import SWEEP_COLUMNS, CostReport, ExecutionReport, SweepRow, SweepSpec
from pim_olap_sim.models.store import Database
from pim_olap_sim.repositories.base import StoreRepository
from pim_olap_sim.repositories.fixtures import load_workload
from pim_olap_sim.services.cost_models import area_overhead, build_cost_report, peak_power
from pim_olap_sim.services.denormalizer import denormalize, memory_overhead
from pim_olap_sim.services.dram_topology import pim_page_count
from pim_olap_sim.services.executor import run_query
from pim_olap_sim.services.pim_timing import column_filter_latency, pim_level_grid, validate_level_spec
from pim_olap_sim.services.query_binding import DEFAULT_MAX_CHAIN
from pim_olap_sim.services.ssb_generator import generate_ssb

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

MICROBENCH_ROWS = 600_038_146
MICROBENCH_WIDTH = 16

GEOMEAN_QUERY = "geomean"
STORE_QUERY = "store"
ERROR_METRIC = "error"
GEOMEAN_METRICS = ("pim_time_ns", "total_model_ns", "cpu_only_model_ns", "modeled_speedup", "energy_j", "relative_efficiency")
LATENCY_PARTS = ("activation", "column_stream", "lisa", "bitmap_writeback", "mode_switch")


class RunOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    report: ExecutionReport
    cost: CostReport


class SweepResult(BaseModel):
    rows: List[SweepRow] = Field(default_factory=list)
    failures: int = Field(default=0, ge=0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.as_record() for row in self.rows], columns=list(SWEEP_COLUMNS))


def format_value(value: Union[int, float, str]) -> str:
    """Stable text form of a metric value."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    return format(float(value), ".10g")


def geomean(values: Iterable[float]) -> float:
    """Geometric mean of positive values.

    Raises:
        ValidationFailure: If ``values`` is empty or holds a non-positive value
    """
    array = np.asarray(list(values), dtype=np.float64)
    if array.size == 0:
        raise ValidationFailure("geometric mean of an empty sequence")
    if (array <= 0).any():
        raise ValidationFailure("geometric mean needs positive values")
    return float(np.exp(np.log(array).mean()))


def run_metrics(report: ExecutionReport, cost: CostReport) -> Dict[str, float]:
    """Flat metric map of one run, in output order."""
    metrics: Dict[str, float] = {
        "pim_time_ns": report.pim_time_ns,
        "total_model_ns": report.total_model_ns,
        "cpu_only_model_ns": report.total_cpu_only_ns,
        "modeled_speedup": report.modeled_speedup,
        "selectivity": report.pim_selectivity,
        "rows_gathered": report.rows_gathered,
        "pim_passes": report.pim_passes,
        "result_rows": len(report.result),
        "area_overhead": cost.area_overhead,
        "peak_power_w": cost.peak_power_w,
        "energy_j": cost.energy_j,
        "baseline_energy_j": cost.baseline_energy_j,
        "relative_efficiency": cost.relative_efficiency,
    }
    for part in LATENCY_PARTS:
        metrics[f"latency.{part}"] = getattr(report.pim_latency, part)
    for operator, ns in report.operator_model_ns.items():
        metrics[f"op.{operator}"] = ns
    return metrics


def parse_levels(labels: Sequence[str], cfg: DramConfig) -> List[PimLevelSpec]:
    specs = []
    for label in labels:
        try:
            spec = PimLevelSpec.parse(label)
        except ValueError as e:
            raise ValidationFailure(str(e), {"level": label}) from e
        specs.append(validate_level_spec(cfg, spec))
    return specs


def parse_denorm(labels: Sequence[str]) -> List[DenormLevel]:
    try:
        return [DenormLevel(label.upper()) for label in labels]
    except ValueError as e:
        raise ValidationFailure(f"unknown denormalization level: {e}", {"levels": list(labels)}) from e


class _GroupTask(NamedTuple):
    """Every (PIM level, query) point of one (scale factor, denorm level) pair."""

    repository: StoreRepository
    store: str
    scale_factor: float
    denorm: str
    pim_levels: Tuple[str, ...]
    queries: Tuple[str, ...]
    workload: str
    cfg: DramConfig
    max_chain: int
    run_id: Optional[str]


def _point_rows(base: Dict[str, object], metrics: Dict[str, float]) -> List[SweepRow]:
    return [SweepRow(**base, metric=name, value=format_value(value)) for name, value in metrics.items()]


def _error_code(error: Exception) -> str:
    """Code recorded in the matrix; unexpected exceptions count as ``internal``."""
    if isinstance(error, PimSimError):
        return error.code
    return PimSimError.code


def _run_group(task: _GroupTask) -> List[SweepRow]:
    if task.run_id:
        set_run_id(task.run_id)
    level = DenormLevel(task.denorm)
    specs = parse_levels(task.pim_levels, task.cfg)
    rows: List[SweepRow] = []
    store_base = {"scale_factor": task.scale_factor, "denorm": level.value, "level": "", "query": STORE_QUERY}

    try:
        db = task.repository.open(task.store)
        _, widened, rewritten = denormalize(db, load_workload(task.workload), level, task.max_chain)
    except Exception as e:
        logging_service.log_error("Grid group failed", e, operation="sweep", denorm=level.value)
        rows.append(SweepRow(**store_base, metric=ERROR_METRIC, value=_error_code(e)))
        for spec in specs:
            for query_id in task.queries:
                base = _config_fields(task, level, spec)
                rows.append(SweepRow(**base, query=query_id, metric=ERROR_METRIC, value=_error_code(e)))
        return rows

    rows.extend(
        _point_rows(
            store_base,
            {"encoded_bytes": widened.encoded_bytes(), "memory_overhead": memory_overhead(db, widened)},
        )
    )
    by_id = {q.id: q for q in rewritten}
    for spec in specs:
        base = _config_fields(task, level, spec)
        collected: Dict[str, List[float]] = {name: [] for name in GEOMEAN_METRICS}
        for query_id in task.queries:
            try:
                report = run_query(by_id[query_id], widened, task.cfg, spec)
                cost = build_cost_report(report, task.cfg, spec)
            except Exception as e:
                logging_service.log_error(
                    "Grid point failed", e, query=query_id, operation="sweep", pim_level=spec.label, denorm=level.value
                )
                rows.append(SweepRow(**base, query=query_id, metric=ERROR_METRIC, value=_error_code(e)))
                continue
            metrics = run_metrics(report, cost)
            rows.extend(_point_rows({**base, "query": query_id}, metrics))
            for name in GEOMEAN_METRICS:
                collected[name].append(metrics[name])
        summary = {
            name: geomean(values)
            for name, values in collected.items()
            if values and min(values) > 0
        }
        rows.extend(_point_rows({**base, "query": GEOMEAN_QUERY}, summary))
    return rows


def _config_fields(task: _GroupTask, level: DenormLevel, spec: PimLevelSpec) -> Dict[str, object]:
    return {
        "scale_factor": task.scale_factor,
        "denorm": level.value,
        "level": spec.label,
        "salp": spec.salp,
        "placement": spec.placement.value if spec.level == PimLevel.SUBARRAY else "",
    }


class ExperimentService:
    """Runs queries and sweeps over stores kept in a repository."""

    def __init__(self, repository: StoreRepository, cfg: DramConfig, max_chain: int = DEFAULT_MAX_CHAIN):
        """Initialize service with repository dependency.

        Args:
            repository: StoreRepository holding generated databases
            cfg: Validated DRAM configuration
            max_chain: FK chain limit used for denormalization
        """
        self.repository = repository
        self.cfg = cfg
        self.max_chain = max_chain

    @staticmethod
    def store_name(scale_factor: float, seed: int) -> str:
        return f"ssb_sf{scale_factor:g}_seed{seed}"

    def ensure_store(self, scale_factor: float, seed: int) -> str:
        """Name of the SSB store for ``(scale_factor, seed)``, generating it on first use."""
        name = self.store_name(scale_factor, seed)
        if self.repository.exists(name):
            return name
        db = generate_ssb(scale_factor, seed)
        self.repository.save(name, db, scale_factor=scale_factor, seed=seed)
        return name

    def denormalize(
        self, db: Database, level: DenormLevel, workload: str = "ssb"
    ) -> Tuple[DenormPlan, Database, Dict[str, QueryIR]]:
        """Widetable and rewritten queries for the whole packaged workload."""
        plan, widened, rewritten = denormalize(db, load_workload(workload), level, self.max_chain)
        return plan, widened, {q.id: q for q in rewritten}

    def run(
        self,
        db: Database,
        query_id: str,
        spec: PimLevelSpec,
        level: DenormLevel = DenormLevel.D1,
        workload: str = "ssb",
    ) -> RunOutcome:
        """Execute one packaged query at one configuration.

        Raises:
            ValidationFailure: If the query id is not part of the workload
        """
        validate_level_spec(self.cfg, spec)
        _, widened, queries = self.denormalize(db, level, workload)
        if query_id not in queries:
            raise ValidationFailure(f"no query '{query_id}' in workload {workload}", {"query": query_id})
        try:
            report = run_query(queries[query_id], widened, self.cfg, spec)
            cost = build_cost_report(report, self.cfg, spec)
        except PimSimError as e:
            logging_service.log_error("Run failed", e, query=query_id, operation="run", pim_level=spec.label)
            raise
        logging_service.log_step("run", True, query=query_id, pim_level=spec.label, denorm=DenormLevel(level).value)
        return RunOutcome(report=report, cost=cost)

    def _tasks(self, spec: SweepSpec, store: Optional[str]) -> List[_GroupTask]:
        levels = parse_denorm(spec.denorm_levels)
        specs = parse_levels(spec.pim_levels, self.cfg)
        known = [q.id for q in load_workload(spec.workload)]
        queries = list(spec.queries) or known
        missing = [q for q in queries if q not in known]
        if missing:
            raise ValidationFailure(f"unknown queries for workload {spec.workload}: {missing}", {"queries": missing})
        if store is None and spec.workload != "ssb":
            raise ValidationFailure("only the ssb workload can be generated; pass a store for other workloads")

        tasks = []
        for scale_factor in spec.scale_factors:
            name = store if store is not None else self.ensure_store(scale_factor, spec.seed)
            for level in levels:
                tasks.append(
                    _GroupTask(
                        repository=self.repository,
                        store=name,
                        scale_factor=scale_factor,
                        denorm=level.value,
                        pim_levels=tuple(s.label for s in specs),
                        queries=tuple(queries),
                        workload=spec.workload,
                        cfg=self.cfg,
                        max_chain=self.max_chain,
                        run_id=get_run_id(),
                    )
                )
        return tasks

    def sweep(self, spec: SweepSpec, store: Optional[str] = None) -> SweepResult:
        """Run the grid; failed points become ``error`` rows and the sweep continues.

        Rows follow grid order (scale factor, denorm level, PIM level, query)
        whatever order workers finish in.

        Raises:
            ValidationFailure: If a level, query id or the workload is invalid
        """
        tasks = self._tasks(spec, store)
        if spec.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                groups = list(pool.map(_run_group, tasks))
        else:
            groups = [_run_group(task) for task in tasks]

        rows = [row for group in groups for row in group]
        failures = sum(1 for row in rows if row.metric == ERROR_METRIC)
        logging_service.log_step(
            "sweep", failures == 0, points=len(tasks), rows=len(rows), failures=failures, workers=spec.workers
        )
        return SweepResult(rows=rows, failures=failures)


def write_matrix(result: SweepResult, out_dir: Union[str, Path], stem: str = "sweep") -> Tuple[Path, Path]:
    """Long-format CSV plus its JSON mirror."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    frame = result.to_frame()
    csv_path = directory / f"{stem}.csv"
    json_path = directory / f"{stem}.json"
    frame.to_csv(csv_path, index=False)
    json_path.write_text(frame.to_json(orient="records", indent=2) + "\n", encoding="utf-8")
    logger.info("Matrix written", extra={"operation": "write_matrix", "path": str(csv_path), "rows": len(frame)})
    return csv_path, json_path


def read_matrix(path: Union[str, Path]) -> pd.DataFrame:
    """Load a sweep CSV.

    Raises:
        ValidationFailure: If the file is missing, empty or has other columns
    """
    source = Path(path)
    if not source.is_file():
        raise ValidationFailure(f"matrix not found: {source}", {"path": str(source)})
    try:
        frame = pd.read_csv(source, dtype={"value": str, "level": str, "placement": str, "query": str})
    except pd.errors.EmptyDataError as e:
        raise ValidationFailure(f"matrix {source.name} is empty") from e
    if list(frame.columns) != list(SWEEP_COLUMNS):
        raise ValidationFailure(f"matrix {source.name} has columns {list(frame.columns)}", {"expected": list(SWEEP_COLUMNS)})
    if frame.empty:
        raise ValidationFailure(f"matrix {source.name} is empty")
    return frame.fillna({"level": "", "placement": ""})


def _point_table(matrix: pd.DataFrame) -> pd.DataFrame:
    """One row per (configuration, query) with a numeric column per metric."""
    points = matrix[
        ~matrix["query"].isin([GEOMEAN_QUERY, STORE_QUERY]) & (matrix["metric"] != ERROR_METRIC)
    ]
    if points.empty:
        raise ValidationFailure("matrix holds no successful runs")
    points = points.assign(value=pd.to_numeric(points["value"]))
    keys = ["scale_factor", "denorm", "level", "query"]
    table = points.pivot_table(index=keys, columns="metric", values="value", aggfunc="first", sort=False)
    return table.reset_index()


def build_report(matrix: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Speedup-vs-selectivity pairs, operator time shares and overhead tables.

    Raises:
        ValidationFailure: If the matrix holds no successful run
    """
    table = _point_table(matrix)
    keys = ["scale_factor", "denorm", "level", "query"]

    speedup = table[keys + ["selectivity", "modeled_speedup"]].sort_values(keys + ["selectivity"], kind="stable")

    op_columns = [c for c in table.columns if str(c).startswith("op.")]
    shares = table[keys + op_columns].melt(id_vars=keys, var_name="operator", value_name="ns").dropna()
    shares["operator"] = shares["operator"].str.slice(3)
    totals = shares.groupby(keys, sort=False)["ns"].transform("sum")
    shares["percent"] = np.where(totals > 0, 100.0 * shares["ns"] / totals, 0.0)

    hardware = (
        table.groupby("level", sort=False)[["area_overhead", "peak_power_w", "pim_time_ns", "energy_j"]]
        .agg({"area_overhead": "first", "peak_power_w": "first", "pim_time_ns": "mean", "energy_j": "mean"})
        .reset_index()
    )

    stores = matrix[(matrix["query"] == STORE_QUERY) & (matrix["metric"] != ERROR_METRIC)]
    storage = (
        stores.assign(value=pd.to_numeric(stores["value"]))
        .pivot_table(index=["scale_factor", "denorm"], columns="metric", values="value", aggfunc="first")
        .reset_index()
        if not stores.empty
        else pd.DataFrame(columns=["scale_factor", "denorm", "encoded_bytes", "memory_overhead"])
    )
    return {
        "speedup_vs_selectivity": speedup.reset_index(drop=True),
        "operator_breakdown": shares.reset_index(drop=True),
        "overhead_by_level": hardware,
        "storage_by_denorm": storage,
    }


def write_report(tables: Dict[str, pd.DataFrame], out_dir: Union[str, Path]) -> List[Path]:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in tables.items():
        path = directory / f"{name}.csv"
        frame.to_csv(path, index=False)
        paths.append(path)
    logging_service.log_step("report", True, tables=len(paths), out=str(directory))
    return paths


def microbenchmark(
    cfg: DramConfig,
    specs: Optional[Sequence[PimLevelSpec]] = None,
    rows: int = MICROBENCH_ROWS,
    width: int = MICROBENCH_WIDTH,
) -> pd.DataFrame:
    """Single-column filter latency per PIM level (analytic)."""
    specs = list(specs) if specs is not None else pim_level_grid()
    column_bytes = -(-rows * width // 64) * 8
    pages = pim_page_count(column_bytes, cfg)
    records = []
    for spec in specs:
        validate_level_spec(cfg, spec)
        latency = column_filter_latency(cfg, spec, column_bytes)
        records.append(
            {
                "level": spec.label,
                "rows": rows,
                "width": width,
                "pages": pages,
                "filter_ms": latency.filter_time * 1e-6,
                "mode_switch_ms": latency.mode_switch * 1e-6,
                "total_ms": latency.total * 1e-6,
                "area_overhead": area_overhead(cfg, spec),
                "peak_power_w": peak_power(cfg, spec),
            }
        )
    logging_service.log_step("microbenchmark", True, levels=len(records), pages=pages)
    return pd.DataFrame(records)
