"""Area, peak-power and energy accounting per PIM configuration."""

import logging
import math
from typing import List, Sequence

from pim_olap_sim.models.errors import ValidationFailure
from pim_olap_sim.models.hardware import DramConfig, PimLevel, PimLevelSpec, PimMode
from pim_olap_sim.models.reports import CostReport, EnergyPhase, ExecutionReport

logger = logging.getLogger(__name__)


def bfu_count(cfg: DramConfig, spec: PimLevelSpec) -> int:
    """Filtering units active while ``spec`` filters."""
    level = spec.level
    if level == PimLevel.BANK_AB:
        return cfg.total_banks
    if level == PimLevel.BANK_SB:
        return cfg.channels * cfg.ranks_per_channel * cfg.chips_per_rank
    if level == PimLevel.RANK:
        return cfg.channels * cfg.ranks_per_channel
    if level == PimLevel.CHANNEL:
        return cfg.channels
    return cfg.total_banks * spec.salp


def area_overhead(cfg: DramConfig, spec: PimLevelSpec) -> float:
    """Added on-chip area as a fraction of the reference chip area.

    Rank and channel units sit outside the DRAM chips and add nothing.
    """
    area = cfg.area
    if spec.level in (PimLevel.BANK_AB, PimLevel.BANK_SB):
        return cfg.banks_per_chip * area.bfu / area.chip_reference
    if spec.level == PimLevel.SUBARRAY:
        return spec.salp * (area.bfu + 2 * area.walker) / area.chip_reference
    return 0.0


def peak_power(cfg: DramConfig, spec: PimLevelSpec) -> float:
    """Peak power in watts; all-bank operation multiplies the DRAM term."""
    power = cfg.power
    dram = power.dram_normal
    if spec.mode == PimMode.ALL_BANK:
        dram *= power.ab_peak_multiplier
    return dram + bfu_count(cfg, spec) * power.bfu_active * 1e-6


def energy(phases: Sequence[EnergyPhase], cfg: DramConfig) -> float:
    """Total energy of ``phases`` in joules.

    Raises:
        ValidationFailure: If a phase has a negative duration
    """
    power = cfg.power
    total = 0.0
    for phase in phases:
        if phase.duration < 0:
            raise ValidationFailure(f"phase {phase.label} has negative duration {phase.duration}")
        dram = phase.dram_power * (power.ab_peak_multiplier if phase.ab_active else 1.0)
        watts = dram + phase.bfu_count * power.bfu_active * 1e-6 + phase.cpu_power
        total += phase.duration * 1e-9 * watts
    return total


def relative_efficiency(phases: Sequence[EnergyPhase], baseline: Sequence[EnergyPhase], cfg: DramConfig) -> float:
    """Baseline energy over PIM energy.

    Infinite when the PIM phases spend nothing against a nonzero baseline;
    two empty accountings are equally efficient.
    """
    spent = energy(phases, cfg)
    reference = energy(baseline, cfg)
    if spent == 0:
        return math.inf if reference > 0 else 1.0
    return reference / spent


def query_energy_phases(report: ExecutionReport, cfg: DramConfig, spec: PimLevelSpec) -> List[EnergyPhase]:
    """PIM filter phase followed by the host phase of one run."""
    power = cfg.power
    filter_ns = report.operator_model_ns.get("pim_filter", 0.0)
    host_ns = report.total_model_ns - filter_ns
    return [
        EnergyPhase(
            label="pim_filter",
            duration=filter_ns,
            dram_power=power.dram_normal,
            bfu_count=bfu_count(cfg, spec) if filter_ns > 0 else 0,
            ab_active=spec.mode == PimMode.ALL_BANK,
        ),
        EnergyPhase(label="host", duration=host_ns, dram_power=power.dram_normal, cpu_power=power.cpu_active),
    ]


def baseline_energy_phases(report: ExecutionReport, cfg: DramConfig) -> List[EnergyPhase]:
    return [
        EnergyPhase(
            label="cpu_only",
            duration=report.total_cpu_only_ns,
            dram_power=cfg.power.dram_normal,
            cpu_power=cfg.power.cpu_active,
        )
    ]


def build_cost_report(report: ExecutionReport, cfg: DramConfig, spec: PimLevelSpec) -> CostReport:
    phases = query_energy_phases(report, cfg, spec)
    baseline = baseline_energy_phases(report, cfg)
    cost = CostReport(
        query=report.query,
        level=spec.label,
        latency=report.pim_latency,
        selectivity=report.pim_selectivity,
        area_overhead=area_overhead(cfg, spec),
        peak_power_w=peak_power(cfg, spec),
        energy_j=energy(phases, cfg),
        baseline_energy_j=energy(baseline, cfg),
        relative_efficiency=relative_efficiency(phases, baseline, cfg),
        modeled_speedup=report.modeled_speedup,
    )
    logger.debug(
        "Cost report built",
        extra={"query": report.query, "pim_level": spec.label, "energy_j": cost.energy_j},
    )
    return cost
