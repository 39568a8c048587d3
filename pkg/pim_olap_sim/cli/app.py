"""Command-line front-end: gen, denorm, run, sweep, report and microbench."""

import json
import logging
from pathlib import Path
from typing import Any, List, Optional, Tuple

import click
import numpy as np
import pandas as pd

from pim_olap_sim.cli.handlers import EXIT_PARTIAL, handle_errors
from pim_olap_sim.config.logging import LoggingService, generate_run_id, set_run_id, setup_logging
from pim_olap_sim.config.settings import Settings, load_settings
from pim_olap_sim.models.errors import StoreFormatError, ValidationFailure
from pim_olap_sim.models.hardware import PimLevel, PimLevelSpec, Placement
from pim_olap_sim.models.reports import SweepSpec
from pim_olap_sim.repositories.binary_store import STORE_SUFFIX, FileStoreRepository
from pim_olap_sim.repositories.fixtures import WORKLOADS
from pim_olap_sim.services.denormalizer import memory_overhead, plan_report
from pim_olap_sim.services.executor import selectivity_sweep
from pim_olap_sim.services.experiment_service import (
    ExperimentService,
    build_report,
    microbenchmark,
    parse_denorm,
    read_matrix,
    run_metrics,
    write_matrix,
    write_report,
)
from pim_olap_sim.services.pim_timing import pim_level_grid
from pim_olap_sim.services.query_binding import DEFAULT_MAX_CHAIN
from pim_olap_sim.services.ssb_generator import generate_ssb

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

DEFAULT_PIM_LEVELS = ",".join(spec.label for spec in pim_level_grid())


def _split(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> List[str]:
    if value is None:
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


def _settings(ctx: click.Context) -> Settings:
    if "settings" not in ctx.obj:
        ctx.obj["settings"] = load_settings(ctx.obj.get("config_path"))
    return ctx.obj["settings"]


def _store_location(path: str) -> Tuple[FileStoreRepository, str]:
    store = Path(path)
    if store.suffix != STORE_SUFFIX:
        raise ValidationFailure(f"store path must end with {STORE_SUFFIX}: {store}", {"path": path})
    if not store.is_file():
        raise StoreFormatError(f"store not found: {store}", {"path": path})
    return FileStoreRepository(store.parent), store.name[: -len(STORE_SUFFIX)]


def _level_spec(pim: str, salp: Optional[int], placement: Optional[str]) -> PimLevelSpec:
    if salp is None and placement is None and pim.lower() != PimLevel.SUBARRAY.value.lower():
        try:
            return PimLevelSpec.parse(pim)
        except ValueError as e:
            raise ValidationFailure(str(e), {"level": pim}) from e
    return PimLevelSpec(
        level=PimLevel.SUBARRAY,
        salp=salp or 2,
        placement=Placement(placement.capitalize()) if placement else Placement.OPTIMISTIC,
    )


def _echo_json(document: Any) -> None:
    click.echo(json.dumps(document, indent=2, ensure_ascii=False, default=str))


@click.group(help="Design-space simulator for processing-in-memory filtering in columnar analytics.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="DramConfig JSON file")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--log-format", type=click.Choice(["json", "text"]), default=None)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: Optional[str], log_format: Optional[str]) -> None:
    setup_logging(log_level, log_format)
    set_run_id(generate_run_id())
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    logging_service.log_operation("debug", "Command started", operation=ctx.invoked_subcommand, config=config_path)


@cli.command()
@click.option("--sf", "scale_factor", type=float, required=True, help="SSB scale factor")
@click.option("--seed", type=int, default=None, help="Generator seed")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.option("--name", default="ssb", show_default=True, help="Store name")
@click.pass_context
@handle_errors
def gen(ctx: click.Context, scale_factor: float, seed: Optional[int], out_dir: Optional[str], name: str) -> None:
    """Generate an SSB database and save it as a store."""
    settings = _settings(ctx)
    seed = settings.default_seed if seed is None else seed
    repository = FileStoreRepository(out_dir or settings.store_dir)

    db = generate_ssb(scale_factor, seed)
    repository.save(name, db, scale_factor=scale_factor, seed=seed)
    manifest = repository.manifest(name)
    reopened = repository.open(name)
    if manifest is None or reopened.row_counts() != manifest.row_counts:
        raise StoreFormatError(f"store {name} does not match its manifest after writing")
    _echo_json(manifest.model_dump(mode="json"))


@cli.command()
@click.option("--db", "store_path", required=True, type=click.Path(dir_okay=False), help="Store file (.pimdb)")
@click.option("--level", "denorm", default="D2", show_default=True, help="D1, D2, D3 or D4")
@click.option("--workload", type=click.Choice(WORKLOADS), default="ssb", show_default=True)
@click.option("--max-chain", type=int, default=DEFAULT_MAX_CHAIN, show_default=True, help="FK hops past the direct FK")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Save the widetable store here")
@click.pass_context
@handle_errors
def denorm(
    ctx: click.Context, store_path: str, denorm: str, workload: str, max_chain: int, out_dir: Optional[str]
) -> None:
    """Analyze the workload, build the widetable and print the fold set."""
    settings = _settings(ctx)
    repository, name = _store_location(store_path)
    level = parse_denorm([denorm])[0]
    db = repository.open(name)
    service = ExperimentService(repository, settings.dram, max_chain)
    plan, widened, _ = service.denormalize(db, level, workload)

    document = plan_report(plan, memory_overhead(db, widened))
    if out_dir is not None:
        target = f"{name}_{level.value.lower()}"
        manifest = repository.manifest(name)
        FileStoreRepository(out_dir).save(
            target,
            widened,
            scale_factor=manifest.scale_factor if manifest else None,
            seed=manifest.seed if manifest else None,
            denorm_level=level.value,
        )
        document["store"] = str(Path(out_dir) / f"{target}{STORE_SUFFIX}")
    _echo_json(document)


@cli.command()
@click.option("--db", "store_path", required=True, type=click.Path(dir_okay=False), help="Store file (.pimdb)")
@click.option("--query", "query_id", required=True, help="Fixture id, e.g. q2.1")
@click.option("--level", "denorm", default="D1", show_default=True, help="Denormalization level")
@click.option("--pim", default="BankAB", show_default=True, help="Channel, Rank, BankSB, BankAB, Subarray or SALP-k")
@click.option("--salp", type=int, default=None, help="Concurrent subarray PEs per bank")
@click.option("--placement", type=click.Choice(["optimistic", "pessimistic"], case_sensitive=False), default=None)
@click.option("--workload", type=click.Choice(WORKLOADS), default="ssb", show_default=True)
@click.pass_context
@handle_errors
def run(
    ctx: click.Context,
    store_path: str,
    query_id: str,
    denorm: str,
    pim: str,
    salp: Optional[int],
    placement: Optional[str],
    workload: str,
) -> None:
    """Execute one query at one configuration and print its metrics and result."""
    settings = _settings(ctx)
    repository, name = _store_location(store_path)
    spec = _level_spec(pim, salp, placement)
    level = parse_denorm([denorm])[0]
    service = ExperimentService(repository, settings.dram)
    outcome = service.run(repository.open(name), query_id, spec, level, workload)
    _echo_json(
        {
            "query": query_id,
            "denorm": level.value,
            "level": spec.label,
            "metrics": run_metrics(outcome.report, outcome.cost),
            "result": outcome.report.result.model_dump(mode="json"),
        }
    )


@cli.command()
@click.option("--db", "store_path", type=click.Path(dir_okay=False), default=None, help="Existing store; skips generation")
@click.option("--sf", "scale_factors", multiple=True, type=float, help="Scale factors to generate (repeatable)")
@click.option("--queries", callback=_split, default=None, help="Comma-separated fixture ids; all by default")
@click.option("--levels", callback=_split, default="D1", show_default=True, help="Comma-separated denorm levels")
@click.option("--pim", "pim_levels", callback=_split, default=DEFAULT_PIM_LEVELS, show_default=True)
@click.option("--workload", type=click.Choice(WORKLOADS), default="ssb", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Worker processes")
@click.option("--stores", "store_dir", type=click.Path(file_okay=False), default=None, help="Where generated stores go")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory")
@click.pass_context
@handle_errors
def sweep(
    ctx: click.Context,
    store_path: Optional[str],
    scale_factors: Tuple[float, ...],
    queries: List[str],
    levels: List[str],
    pim_levels: List[str],
    workload: str,
    seed: Optional[int],
    workers: Optional[int],
    store_dir: Optional[str],
    out_dir: str,
) -> None:
    """Run a design-space grid and write the long-format result matrix."""
    settings = _settings(ctx)
    if store_path is not None:
        repository, store = _store_location(store_path)
        manifest = repository.manifest(store)
        factors = [manifest.scale_factor] if manifest and manifest.scale_factor else [0.0]
    else:
        repository, store = FileStoreRepository(store_dir or settings.store_dir), None
        factors = list(scale_factors) or [0.01]

    spec = SweepSpec(
        scale_factors=factors,
        denorm_levels=levels,
        pim_levels=pim_levels,
        queries=queries,
        workload=workload,
        seed=settings.default_seed if seed is None else seed,
        out_dir=out_dir,
        workers=workers or settings.sweep_workers,
    )
    result = ExperimentService(repository, settings.dram).sweep(spec, store)
    csv_path, json_path = write_matrix(result, out_dir)
    _echo_json({"csv": str(csv_path), "json": str(json_path), "rows": len(result.rows), "failures": result.failures})
    if result.failures:
        ctx.exit(EXIT_PARTIAL)


@cli.command()
@click.option("--matrix", "matrix_path", required=True, type=click.Path(dir_okay=False), help="Sweep CSV")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory")
@click.pass_context
@handle_errors
def report(ctx: click.Context, matrix_path: str, out_dir: str) -> None:
    """Summary tables and plot-ready CSVs from a sweep matrix."""
    tables = build_report(read_matrix(matrix_path))
    paths = write_report(tables, out_dir)
    _echo_json({"tables": [str(p) for p in paths]})


@cli.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Write CSVs here")
@click.option("--rows", type=int, default=None, help="Column length")
@click.option("--width", type=int, default=None, help="Packed width in bits")
@click.option("--include-sb", is_flag=True, help="Add the single-bank level")
@click.option("--pessimistic", is_flag=True, help="Add pessimistic subarray placements")
@click.option("--selectivity", "with_selectivity", is_flag=True, help="Also run the synthetic selectivity sweep")
@click.pass_context
@handle_errors
def microbench(
    ctx: click.Context,
    out_dir: Optional[str],
    rows: Optional[int],
    width: Optional[int],
    include_sb: bool,
    pessimistic: bool,
    with_selectivity: bool,
) -> None:
    """Single-column filter latency per PIM level."""
    cfg = _settings(ctx).dram
    options = {key: value for key, value in (("rows", rows), ("width", width)) if value is not None}
    table = microbenchmark(cfg, pim_level_grid(include_sb, pessimistic), **options)
    click.echo(table.to_string(index=False))
    tables = {"microbench": table}
    if with_selectivity:
        points = selectivity_sweep(cfg, PimLevelSpec(level=PimLevel.BANK_AB), np.logspace(-6, -1, 11).tolist())
        tables["selectivity_sweep"] = pd.DataFrame([point.model_dump() for point in points])
        click.echo(tables["selectivity_sweep"].to_string(index=False))
    if out_dir is not None:
        write_report(tables, out_dir)
