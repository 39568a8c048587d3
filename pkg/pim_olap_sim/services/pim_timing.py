"""Analytic filter latency model for each PIM hierarchy level.

Per PIM page (one system-wide row position):

* BankAB: every bank streams its row in lockstep, ``tRP + tRCD + columns x tCCD_S``.
* BankSB: one bank per chip at a time at the same-bank-group cadence ``tCCD_L``,
  repeated for every bank of the chip.
* Rank: same throughput as BankSB; ranks of a channel work in parallel.
* Channel: one unit per channel walks its ranks in turn.
* Subarray SALP-k: k PEs per bank each stream a row at the PE word cadence,
  plus LISA hops for rows stored away from a PE.

A column costs ``passes x pages x page latency`` plus one mode-switch pair.
"""

import logging
import math
from typing import List

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import ValidationFailure
from pim_olap_sim.models.hardware import (
    DramConfig,
    LatencyBreakdown,
    PimLevel,
    PimLevelSpec,
    Placement,
)
from pim_olap_sim.services.dram_topology import pim_page_count

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)


def validate_level_spec(cfg: DramConfig, spec: PimLevelSpec) -> PimLevelSpec:
    if spec.level == PimLevel.SUBARRAY:
        max_salp = cfg.subarrays_per_bank // 2
        if not 1 <= spec.salp <= max_salp:
            raise ValidationFailure(
                f"salp must be in 1..{max_salp} for {cfg.subarrays_per_bank} subarrays per bank (got {spec.salp})",
                {"salp": spec.salp},
            )
    return spec


def _pe_distance(index: int, pairs: List[int]) -> int:
    return min(min(abs(index - 2 * p), abs(index - (2 * p + 1))) for p in pairs)


def salp_hop_count(subarray_index: int, salp: int, placement: Placement, subarrays_per_bank: int = 16) -> int:
    """LISA hops between a subarray and the nearest PE.

    A PE serves a pair of adjacent subarrays; PE ``j`` of ``salp`` sits at
    pair ``floor(j * pairs / salp)`` plus a common offset. Optimistic
    placement uses offset 0; pessimistic takes the worst offset that keeps
    every PE inside the bank.
    """
    if not 0 <= subarray_index < subarrays_per_bank:
        raise ValidationFailure(f"subarray index {subarray_index} out of range")
    total_pairs = subarrays_per_bank // 2
    if not 1 <= salp <= total_pairs:
        raise ValidationFailure(f"salp must be in 1..{total_pairs}")
    spacing = [j * total_pairs // salp for j in range(salp)]
    last_offset = total_pairs - 1 - spacing[-1]

    def placed(offset: int) -> List[int]:
        return [offset + pair for pair in spacing]

    if placement == Placement.OPTIMISTIC:
        return _pe_distance(subarray_index, placed(0))
    return max(_pe_distance(subarray_index, placed(offset)) for offset in range(last_offset + 1))


def page_lisa_hops(cfg: DramConfig, spec: PimLevelSpec) -> int:
    """Hops charged per page: data next to a PE when optimistic, the worst subarray when pessimistic."""
    if spec.level != PimLevel.SUBARRAY:
        return 0
    hops = [
        salp_hop_count(i, spec.salp, spec.placement, cfg.subarrays_per_bank)
        for i in range(cfg.subarrays_per_bank)
    ]
    return min(hops) if spec.placement == Placement.OPTIMISTIC else max(hops)


def lisa_transfer_latency(cfg: DramConfig, hops: int) -> float:
    """Each hop costs an eighth of a row activation (tRCD + tRAS)."""
    if hops < 0:
        raise ValidationFailure(f"hops must be >= 0 (got {hops})")
    hop = (cfg.timing.tRCD + cfg.timing.tRAS) * cfg.clock_period / 8
    return hops * hop


def mode_switch_overhead(cfg: DramConfig) -> float:
    """Enter plus exit of PIM mode."""
    return 2 * cfg.mode_switch


def page_filter_latency(cfg: DramConfig, spec: PimLevelSpec) -> LatencyBreakdown:
    """Latency to filter one PIM page at the given level."""
    validate_level_spec(cfg, spec)
    t = cfg.timing
    tck = cfg.clock_period
    columns = cfg.columns_per_row
    writeback = t.tCCD_S * tck

    if spec.level == PimLevel.BANK_AB:
        return LatencyBreakdown(
            activation=(t.tRP + t.tRCD) * tck,
            column_stream=columns * t.tCCD_S * tck,
            bitmap_writeback=writeback,
        )

    if spec.level in (PimLevel.BANK_SB, PimLevel.RANK, PimLevel.CHANNEL):
        banks = cfg.banks_per_chip
        breakdown = LatencyBreakdown(
            activation=banks * (t.tRP + t.tRCD) * tck,
            column_stream=banks * columns * t.tCCD_L * tck,
            bitmap_writeback=banks * writeback,
        )
        if spec.level == PimLevel.CHANNEL:
            return breakdown.scaled(cfg.ranks_per_channel)
        return breakdown

    k = spec.salp
    scale = cfg.subarray_row_scale
    return LatencyBreakdown(
        activation=(t.tRP + t.tRCD + t.tRAS) * scale * tck / k,
        column_stream=columns * cfg.subarray_word_cycles * scale * tck / k,
        lisa=lisa_transfer_latency(cfg, page_lisa_hops(cfg, spec)) / k,
        bitmap_writeback=writeback / k,
    )


def column_filter_latency(cfg: DramConfig, spec: PimLevelSpec, packed_bytes: int, passes: int = 1) -> LatencyBreakdown:
    """Filter a packed column ``passes`` times, charging one mode-switch pair."""
    if passes < 1:
        raise ValidationFailure(f"passes must be >= 1 (got {passes})")
    pages = pim_page_count(packed_bytes, cfg)
    per_page = page_filter_latency(cfg, spec)
    streamed = per_page.scaled(passes * pages)
    return streamed + LatencyBreakdown(mode_switch=mode_switch_overhead(cfg))


def query_filter_latency(cfg: DramConfig, spec: PimLevelSpec, column_bytes: List[int]) -> LatencyBreakdown:
    """One pass per entry of ``column_bytes`` and a single mode-switch pair; zero if empty."""
    if not column_bytes:
        return LatencyBreakdown()
    per_page = page_filter_latency(cfg, spec)
    pages = sum(pim_page_count(b, cfg) for b in column_bytes)
    return per_page.scaled(pages) + LatencyBreakdown(mode_switch=mode_switch_overhead(cfg))


def amortization_pages(cfg: DramConfig, spec: PimLevelSpec, fraction: float = 0.01) -> int:
    """Smallest page count whose filter time makes the mode switch at most ``fraction`` of it."""
    if fraction <= 0:
        raise ValidationFailure("fraction must be positive")
    overhead = mode_switch_overhead(cfg)
    if overhead == 0:
        return 0
    page = page_filter_latency(cfg, spec).filter_time
    return math.ceil(overhead / (fraction * page))


def pim_level_grid(include_sb: bool = False, include_pessimistic: bool = False) -> List[PimLevelSpec]:
    """Channel, Rank, BankAB and SALP-2/4/8, optionally with BankSB and pessimistic variants."""
    grid = [
        PimLevelSpec(level=PimLevel.CHANNEL),
        PimLevelSpec(level=PimLevel.RANK),
    ]
    if include_sb:
        grid.append(PimLevelSpec(level=PimLevel.BANK_SB))
    grid.append(PimLevelSpec(level=PimLevel.BANK_AB))
    for salp in (2, 4, 8):
        grid.append(PimLevelSpec(level=PimLevel.SUBARRAY, salp=salp))
        if include_pessimistic:
            grid.append(PimLevelSpec(level=PimLevel.SUBARRAY, salp=salp, placement=Placement.PESSIMISTIC))
    return grid
