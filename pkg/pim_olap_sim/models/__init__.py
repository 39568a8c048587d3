"""Data models for the simulator."""

from pim_olap_sim.models.errors import (
    AggregateOverflowError,
    ConfigValidationError,
    DanglingForeignKeyError,
    ErrorResponse,
    IngestError,
    LengthMismatchError,
    PimSimError,
    SchemaError,
    StoreFormatError,
    UnknownColumnError,
    UnsupportedWidthError,
    ValidationFailure,
    ValueOverflowError,
)
from pim_olap_sim.models.hardware import DramConfig, LatencyBreakdown, PimLevel, PimLevelSpec, Placement
from pim_olap_sim.models.plans import DenormLevel, DenormPlan, PhysicalPlan
from pim_olap_sim.models.query import QueryIR
from pim_olap_sim.models.reports import CostReport, ExecutionReport, ResultTable, SweepSpec
from pim_olap_sim.models.schema import Schema
from pim_olap_sim.models.store import Database, StoreManifest

__all__ = [
    "PimSimError",
    "ValidationFailure",
    "ConfigValidationError",
    "UnsupportedWidthError",
    "ValueOverflowError",
    "LengthMismatchError",
    "UnknownColumnError",
    "SchemaError",
    "IngestError",
    "StoreFormatError",
    "DanglingForeignKeyError",
    "AggregateOverflowError",
    "ErrorResponse",
    "DramConfig",
    "LatencyBreakdown",
    "PimLevel",
    "PimLevelSpec",
    "Placement",
    "DenormLevel",
    "DenormPlan",
    "PhysicalPlan",
    "QueryIR",
    "CostReport",
    "ExecutionReport",
    "ResultTable",
    "SweepSpec",
    "Schema",
    "Database",
    "StoreManifest",
]
