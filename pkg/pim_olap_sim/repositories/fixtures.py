"""Packaged schema and QueryIR fixture files."""

import json
import logging
from importlib import resources
from pathlib import Path
from typing import List, Union

from pydantic import ValidationError

from pim_olap_sim.models.errors import SchemaError, ValidationFailure
from pim_olap_sim.models.query import QueryIR
from pim_olap_sim.models.schema import Schema

logger = logging.getLogger(__name__)

WORKLOADS = ("ssb", "tpch")


def _data_dir() -> Path:
    return Path(str(resources.files("pim_olap_sim") / "data"))


def _check_workload(workload: str) -> str:
    if workload not in WORKLOADS:
        raise ValidationFailure(f"unknown workload '{workload}'", {"workloads": list(WORKLOADS)})
    return workload


def load_schema(source: Union[str, Path]) -> Schema:
    """Schema by packaged name (``ssb``, ``tpch``) or JSON file path."""
    path = Path(source)
    if str(source) in WORKLOADS:
        path = _data_dir() / "schemas" / f"{source}.json"
    if not path.is_file():
        raise SchemaError(f"schema file not found: {path}")
    try:
        return Schema.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise SchemaError(f"invalid schema {path.name}: {e}") from e


def query_file(query_id: str, workload: str = "ssb") -> Path:
    """Packaged fixture path for an id such as ``q2.1`` or ``q10``."""
    _check_workload(workload)
    return _data_dir() / "queries" / workload / f"{query_id.replace('.', '_')}.json"


def load_query(source: Union[str, Path], workload: str = "ssb") -> QueryIR:
    """Query by fixture id within ``workload``, or by JSON file path.

    Raises:
        ValidationFailure: the fixture does not exist or is malformed
    """
    path = Path(source)
    if not path.is_file():
        path = query_file(str(source), workload)
    if not path.is_file():
        raise ValidationFailure(f"no query fixture '{source}' in workload {workload}", {"query": str(source)})
    try:
        return QueryIR.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (ValidationError, json.JSONDecodeError) as e:
        raise ValidationFailure(f"invalid query fixture {path.name}: {e}") from e


def _fixture_order(path: Path) -> List[int]:
    return [int(part) for part in path.stem.lstrip("q").split("_")]


def load_workload(workload: str = "ssb") -> List[QueryIR]:
    """Every packaged query of a workload in numeric id order."""
    directory = _data_dir() / "queries" / _check_workload(workload)
    paths = sorted(directory.glob("q*.json"), key=_fixture_order)
    queries = [load_query(p) for p in paths]
    logger.debug("Workload loaded", extra={"workload": workload, "queries": len(queries)})
    return queries
