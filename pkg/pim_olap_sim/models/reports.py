"""Execution, cost and sweep report models."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field

from pim_olap_sim.models.hardware import LatencyBreakdown


class ResultTable(BaseModel):
    columns: List[str]
    rows: List[List[Any]] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


class ExecutionReport(BaseModel):
    """Outcome of one query run: result, modeled times and selectivity."""

    query: str
    level: str
    result: ResultTable
    row_count: int = Field(..., ge=0)
    rows_gathered: int = Field(..., ge=0)
    pim_selectivity: float = Field(..., ge=0.0, le=1.0)
    pim_passes: int = Field(default=0, ge=0)
    pim_latency: LatencyBreakdown = Field(default_factory=LatencyBreakdown)
    operator_model_ns: Dict[str, float] = Field(default_factory=dict)
    cpu_only_model_ns: Dict[str, float] = Field(default_factory=dict)
    wall_ns: Dict[str, float] = Field(default_factory=dict, description="Measured, informational only")

    @computed_field
    @property
    def pim_time_ns(self) -> float:
        return self.pim_latency.total

    @computed_field
    @property
    def total_model_ns(self) -> float:
        return sum(self.operator_model_ns.values())

    @computed_field
    @property
    def total_cpu_only_ns(self) -> float:
        return sum(self.cpu_only_model_ns.values())

    @computed_field
    @property
    def modeled_speedup(self) -> float:
        if self.total_model_ns <= 0:
            return 1.0
        return self.total_cpu_only_ns / self.total_model_ns


class SelectivityPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    selectivity: float = Field(..., ge=0.0, le=1.0)
    rows: int
    rows_gathered: int
    pim_model_ns: float
    cpu_only_model_ns: float
    modeled_speedup: float


class EnergyPhase(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    duration: float = Field(..., description="ns")
    dram_power: float = Field(default=0.0, ge=0.0, description="W")
    bfu_count: int = Field(default=0, ge=0)
    cpu_power: float = Field(default=0.0, ge=0.0, description="W")
    ab_active: bool = False


class CostReport(BaseModel):
    query: str
    level: str
    latency: LatencyBreakdown
    selectivity: float = Field(..., ge=0.0, le=1.0)
    area_overhead: float = Field(..., ge=0.0)
    peak_power_w: float
    energy_j: float
    baseline_energy_j: float
    relative_efficiency: float
    modeled_speedup: float


class SweepSpec(BaseModel):
    """Experiment grid; points are enumerated in field order."""

    scale_factors: List[float] = Field(default_factory=lambda: [0.01])
    denorm_levels: List[str] = Field(default_factory=lambda: ["D1"])
    pim_levels: List[str] = Field(default_factory=lambda: ["BankAB"])
    queries: List[str] = Field(default_factory=list, description="Fixture ids; empty means all")
    workload: str = "ssb"
    seed: int = Field(default=7, ge=0)
    out_dir: Optional[str] = None
    workers: int = Field(default=1, ge=1)


SWEEP_COLUMNS = ("scale_factor", "denorm", "level", "salp", "placement", "query", "metric", "value")


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    scale_factor: float
    denorm: str
    level: str
    salp: int = 1
    placement: str = ""
    query: str
    metric: str
    value: str

    def as_record(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in SWEEP_COLUMNS}
