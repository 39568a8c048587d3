"""Pydantic models describing the DRAM system and PIM configurations."""

from enum import Enum
from typing import Any, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


ADDRESS_FIELDS = (
    "chip",
    "column_low",
    "channel",
    "rank",
    "bank_group",
    "bank",
    "column_high",
    "subarray",
    "row",
)


class TimingParams(BaseModel):
    """JEDEC timing parameters in DRAM clock cycles."""

    model_config = ConfigDict(frozen=True)

    tCCD_S: int = Field(default=4, description="Column-to-column delay, different bank group")
    tCCD_L: int = Field(default=8, description="Column-to-column delay, same bank group")
    tRCD: int = Field(default=22, description="Row-to-column delay")
    tRP: int = Field(default=22, description="Row precharge")
    tRAS: int = Field(default=52, description="Row active time")
    tCL: int = Field(default=22, description="CAS latency")


class PowerParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    bfu_active: float = Field(default=118.7, description="Active power of one filtering unit, microwatts")
    dram_normal: float = Field(default=12.0, description="DRAM power in normal operation, watts")
    ab_peak_multiplier: float = Field(default=4.0, description="DRAM power multiplier in all-bank mode")
    cpu_active: float = Field(default=120.0, description="Host CPU power while busy, watts")


class AreaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    bfu: float = Field(default=0.001, description="Area of one filtering unit, mm^2")
    walker: float = Field(default=0.012, description="Area of one subarray walker, mm^2")
    chip_reference: float = Field(default=16.0, description="Reference chip area, mm^2")


class HostParams(BaseModel):
    """Analytic host CPU cost model parameters."""

    model_config = ConfigDict(frozen=True)

    seq_bandwidth_gbps: float = Field(default=25.6, description="Sequential memory bandwidth, GB/s")
    random_derate: float = Field(default=8.0, description="Bandwidth divisor for bitmap-driven gathers")
    query_overhead_ns: float = Field(default=200_000.0, description="Fixed per-query host overhead")
    aggregate_ns_per_row: float = Field(default=1.0)
    join_ns_per_row: float = Field(default=2.0)
    scan_ns_per_row: float = Field(default=0.25, description="Host predicate cost per row and column")


class DramConfig(BaseModel):
    """DRAM hierarchy geometry plus timing, power and area parameters.

    The model itself accepts any values; ``validate_config`` reports every
    violated invariant at once.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(default="DDR4_8Gb_x8_3200")
    channels: int = 8
    ranks_per_channel: int = 4
    chips_per_rank: int = 8
    device_width: int = 8
    bank_groups: int = 4
    banks_per_group: int = 4
    subarrays_per_bank: int = 16
    rows_per_subarray: int = 4096
    columns_per_row: int = Field(default=128, description="64-bit column positions per chip row")
    clock_period: float = Field(default=0.625, description="DRAM clock period, ns")
    timing: TimingParams = Field(default_factory=TimingParams)
    power: PowerParams = Field(default_factory=PowerParams)
    area: AreaParams = Field(default_factory=AreaParams)
    host: HostParams = Field(default_factory=HostParams)
    mode_switch: float = Field(default=2000.0, description="One PIM mode transition, ns")
    superpage_bytes: Optional[int] = Field(default=None, description="PIM pages round up to this size")
    interleave_order: List[str] = Field(default_factory=lambda: list(ADDRESS_FIELDS))
    column_low_bits: int = Field(default=0, ge=0)
    subarray_word_cycles: float = Field(default=1.0, description="Cycles per word at a subarray PE")
    subarray_row_scale: float = Field(default=2.4, description="Calibration multiplier on subarray row time")

    @property
    def banks_per_chip(self) -> int:
        return self.bank_groups * self.banks_per_group

    @property
    def row_bytes_per_chip(self) -> int:
        return self.columns_per_row * 8

    @property
    def total_banks(self) -> int:
        return self.channels * self.ranks_per_channel * self.chips_per_rank * self.banks_per_chip

    @property
    def capacity_bytes(self) -> int:
        return (
            self.total_banks
            * self.subarrays_per_bank
            * self.rows_per_subarray
            * self.row_bytes_per_chip
        )


class AddressParts(BaseModel):
    """Decomposed physical address.

    ``chip`` selects the 64-bit word lane inside a de-interleaved burst.
    """

    model_config = ConfigDict(frozen=True)

    channel: int = Field(default=0, ge=0)
    rank: int = Field(default=0, ge=0)
    bank_group: int = Field(default=0, ge=0)
    bank: int = Field(default=0, ge=0)
    subarray: int = Field(default=0, ge=0)
    row_in_subarray: int = Field(default=0, ge=0)
    column: int = Field(default=0, ge=0)
    chip: int = Field(default=0, ge=0)


class PimPageGeometry(BaseModel):
    model_config = ConfigDict(frozen=True)

    bytes: int
    rows_spanned: int
    banks_covered: int


class PimLevel(str, Enum):
    CHANNEL = "Channel"
    RANK = "Rank"
    BANK_SB = "BankSB"
    BANK_AB = "BankAB"
    SUBARRAY = "Subarray"


class Placement(str, Enum):
    OPTIMISTIC = "Optimistic"
    PESSIMISTIC = "Pessimistic"


class PimMode(str, Enum):
    ALL_BANK = "AB"
    SINGLE_BANK = "SB"


class PimLevelSpec(BaseModel):
    """Where the filtering units sit and how many subarray PEs run at once."""

    model_config = ConfigDict(frozen=True)

    level: PimLevel
    salp: int = Field(default=1, ge=1)
    placement: Placement = Placement.OPTIMISTIC

    @model_validator(mode="before")
    @classmethod
    def drop_subarray_fields(cls, data: Any) -> Any:
        """salp and placement only apply to the subarray level."""
        if isinstance(data, dict) and "level" in data:
            if PimLevel(data["level"]) != PimLevel.SUBARRAY:
                return {"level": data["level"]}
        return data

    @property
    def mode(self) -> PimMode:
        if self.level in (PimLevel.BANK_AB, PimLevel.SUBARRAY):
            return PimMode.ALL_BANK
        return PimMode.SINGLE_BANK

    @property
    def label(self) -> str:
        if self.level == PimLevel.SUBARRAY:
            suffix = "" if self.placement == Placement.OPTIMISTIC else "-pess"
            return f"SALP-{self.salp}{suffix}"
        return self.level.value

    @classmethod
    def parse(cls, text: str) -> "PimLevelSpec":
        """Parse labels such as ``BankAB``, ``SALP-4`` or ``SALP-2-pess``."""
        token = text.strip()
        if token.upper().startswith("SALP-"):
            parts = token.split("-")
            placement = Placement.OPTIMISTIC
            if len(parts) > 2 and parts[2].lower().startswith("pess"):
                placement = Placement.PESSIMISTIC
            return cls(level=PimLevel.SUBARRAY, salp=int(parts[1]), placement=placement)
        for level in PimLevel:
            if level.value.lower() == token.lower():
                return cls(level=level)
        raise ValueError(f"Unknown PIM level '{text}'")


class LatencyBreakdown(BaseModel):
    """Latency components in nanoseconds; ``total`` is their sum."""

    model_config = ConfigDict(frozen=True)

    activation: float = Field(default=0.0, ge=0)
    column_stream: float = Field(default=0.0, ge=0)
    lisa: float = Field(default=0.0, ge=0)
    bitmap_writeback: float = Field(default=0.0, ge=0)
    mode_switch: float = Field(default=0.0, ge=0)

    @computed_field
    @property
    def filter_time(self) -> float:
        return self.activation + self.column_stream + self.lisa + self.bitmap_writeback

    @computed_field
    @property
    def total(self) -> float:
        return self.filter_time + self.mode_switch

    def scaled(self, factor: float) -> "LatencyBreakdown":
        return LatencyBreakdown(
            activation=self.activation * factor,
            column_stream=self.column_stream * factor,
            lisa=self.lisa * factor,
            bitmap_writeback=self.bitmap_writeback * factor,
            mode_switch=self.mode_switch * factor,
        )

    def __add__(self, other: "LatencyBreakdown") -> "LatencyBreakdown":
        return LatencyBreakdown(
            activation=self.activation + other.activation,
            column_stream=self.column_stream + other.column_stream,
            lisa=self.lisa + other.lisa,
            bitmap_writeback=self.bitmap_writeback + other.bitmap_writeback,
            mode_switch=self.mode_switch + other.mode_switch,
        )
