"""DRAM hierarchy geometry, address mapping, PIM pages and word de-interleaving."""

import logging
import math
from typing import Dict, List, Tuple

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import ConfigValidationError, ValidationFailure
from pim_olap_sim.models.hardware import (
    ADDRESS_FIELDS,
    AddressParts,
    DramConfig,
    PimPageGeometry,
)

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

WORD_BYTES = 8
CACHE_LINE_BYTES = 64
DEVICE_WIDTHS = (4, 8, 16)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def validate_config(cfg: DramConfig) -> DramConfig:
    """Return ``cfg`` if it satisfies every invariant, else raise with all violations.

    Raises:
        ConfigValidationError: listing every violated invariant
    """
    errors: List[str] = []
    counts = {
        "channels": cfg.channels,
        "ranks_per_channel": cfg.ranks_per_channel,
        "chips_per_rank": cfg.chips_per_rank,
        "bank_groups": cfg.bank_groups,
        "banks_per_group": cfg.banks_per_group,
        "subarrays_per_bank": cfg.subarrays_per_bank,
        "rows_per_subarray": cfg.rows_per_subarray,
        "columns_per_row": cfg.columns_per_row,
    }
    for name, value in counts.items():
        if value < 1:
            errors.append(f"{name} must be >= 1 (got {value})")

    for name in ("channels", "ranks_per_channel"):
        if counts[name] >= 1 and not _is_power_of_two(counts[name]):
            errors.append(f"{name} must be a power of two (got {counts[name]})")
    if cfg.bank_groups >= 1 and cfg.banks_per_group >= 1 and not _is_power_of_two(cfg.banks_per_chip):
        errors.append(f"total banks per chip must be a power of two (got {cfg.banks_per_chip})")

    if cfg.device_width not in DEVICE_WIDTHS:
        errors.append(f"device_width must be one of {DEVICE_WIDTHS} (got {cfg.device_width})")
    if cfg.chips_per_rank * cfg.device_width != 64:
        errors.append(
            f"chips_per_rank x device_width must be 64 "
            f"(got {cfg.chips_per_rank} x {cfg.device_width} = {cfg.chips_per_rank * cfg.device_width})"
        )
    if cfg.subarrays_per_bank >= 1 and cfg.subarrays_per_bank % 2 != 0:
        errors.append(f"subarrays_per_bank must be even (got {cfg.subarrays_per_bank})")

    if cfg.clock_period <= 0:
        errors.append("clock_period must be positive")
    for name, value in cfg.timing.model_dump().items():
        if value < 0:
            errors.append(f"timing.{name} must be >= 0 (got {value})")
    row_access = cfg.timing.tRP + cfg.timing.tRCD + cfg.timing.tCL
    if not 50 <= row_access <= 200:
        errors.append(f"tRP + tRCD + tCL = {row_access} cycles is outside the 50..200 sanity bound")
    if cfg.mode_switch < 0:
        errors.append("mode_switch must be >= 0")

    if sorted(cfg.interleave_order) != sorted(ADDRESS_FIELDS):
        errors.append(f"interleave_order must be a permutation of {list(ADDRESS_FIELDS)}")
    if cfg.columns_per_row >= 1 and cfg.columns_per_row % (1 << cfg.column_low_bits) != 0:
        errors.append("columns_per_row must be divisible by 2**column_low_bits")
    if cfg.superpage_bytes is not None and cfg.superpage_bytes < 1:
        errors.append("superpage_bytes must be positive when set")
    if cfg.subarray_row_scale <= 0 or cfg.subarray_word_cycles <= 0:
        errors.append("subarray calibration constants must be positive")

    # page size only matters once the hierarchy itself is sound
    if not errors and cfg.superpage_bytes:
        page = pim_page_bytes(cfg)
        if cfg.capacity_bytes % page != 0:
            errors.append(
                f"PIM page of {page} bytes (superpage_bytes={cfg.superpage_bytes}) "
                f"does not divide the {cfg.capacity_bytes}-byte capacity"
            )

    if errors:
        logging_service.log_operation(
            "warning",
            "DRAM configuration rejected",
            operation="validate_config",
            error="; ".join(errors),
            config=cfg.name,
        )
        raise ConfigValidationError(errors)
    return cfg


def pim_page_geometry(cfg: DramConfig) -> PimPageGeometry:
    """Bytes, chip rows per bank and bank count of one PIM page."""
    base = (
        cfg.channels
        * cfg.ranks_per_channel
        * cfg.chips_per_rank
        * cfg.banks_per_chip
        * cfg.row_bytes_per_chip
    )
    rows_spanned = 1
    if cfg.superpage_bytes:
        rows_spanned = math.lcm(base, cfg.superpage_bytes) // base
    return PimPageGeometry(bytes=base * rows_spanned, rows_spanned=rows_spanned, banks_covered=cfg.total_banks)


def pim_page_bytes(cfg: DramConfig) -> int:
    return pim_page_geometry(cfg).bytes


def pim_page_count(column_bytes: int, cfg: DramConfig) -> int:
    """PIM pages needed for a column; the last page is zero-padded."""
    if column_bytes < 0:
        raise ValidationFailure(f"column_bytes must be >= 0 (got {column_bytes})")
    page = pim_page_bytes(cfg)
    return -(-column_bytes // page)


def _field_radices(cfg: DramConfig) -> Dict[str, int]:
    low = 1 << cfg.column_low_bits
    return {
        "chip": cfg.chips_per_rank,
        "column_low": low,
        "channel": cfg.channels,
        "rank": cfg.ranks_per_channel,
        "bank_group": cfg.bank_groups,
        "bank": cfg.banks_per_group,
        "column_high": cfg.columns_per_row // low,
        "subarray": cfg.subarrays_per_bank,
        "row": cfg.rows_per_subarray,
    }


def _ordered_radices(cfg: DramConfig) -> List[Tuple[str, int]]:
    radices = _field_radices(cfg)
    return [(name, radices[name]) for name in cfg.interleave_order]


def words_per_burst(cfg: DramConfig) -> int:
    """64-bit words that share one column position across a rank."""
    return _field_radices(cfg)["chip"]


def decompose_address(cfg: DramConfig, physical: int) -> AddressParts:
    """Split an 8-byte aligned byte address into hierarchy indices (lowest field first)."""
    if physical < 0 or physical >= cfg.capacity_bytes:
        raise ValidationFailure(f"address {physical:#x} outside capacity {cfg.capacity_bytes:#x}")
    if physical % WORD_BYTES:
        raise ValidationFailure(f"address {physical:#x} is not 8-byte aligned")

    remaining = physical // WORD_BYTES
    fields: Dict[str, int] = {}
    for name, radix in _ordered_radices(cfg):
        remaining, fields[name] = divmod(remaining, radix)

    low = 1 << cfg.column_low_bits
    return AddressParts(
        channel=fields["channel"],
        rank=fields["rank"],
        bank_group=fields["bank_group"],
        bank=fields["bank"],
        subarray=fields["subarray"],
        row_in_subarray=fields["row"],
        column=fields["column_high"] * low + fields["column_low"],
        chip=fields["chip"],
    )


def compose_address(cfg: DramConfig, parts: AddressParts) -> int:
    """Inverse of ``decompose_address``."""
    radices = _field_radices(cfg)
    low = 1 << cfg.column_low_bits
    fields = {
        "chip": parts.chip,
        "column_low": parts.column % low,
        "channel": parts.channel,
        "rank": parts.rank,
        "bank_group": parts.bank_group,
        "bank": parts.bank,
        "column_high": parts.column // low,
        "subarray": parts.subarray,
        "row": parts.row_in_subarray,
    }
    if parts.column >= cfg.columns_per_row:
        raise ValidationFailure(f"column {parts.column} out of range (< {cfg.columns_per_row})")
    for name, value in fields.items():
        if value >= radices[name]:
            raise ValidationFailure(f"{name} index {value} out of range (< {radices[name]})")

    word_index = 0
    for name, radix in reversed(_ordered_radices(cfg)):
        word_index = word_index * radix + fields[name]
    return word_index * WORD_BYTES


def line_bytes(cfg: DramConfig) -> int:
    """Block handled by the de-interleaving unit: one cache line, or a line pair for x4 parts."""
    return max(CACHE_LINE_BYTES, cfg.chips_per_rank * WORD_BYTES)


def deinterleave_cacheline(line: bytes, cfg: DramConfig) -> np.ndarray:
    """Place each 64-bit word wholly in one chip.

    Returns a ``(beats, chips)`` array: entry ``[b, c]`` is the device-width
    slice chip ``c`` drives on beat ``b``. Chip ``c`` holds words ``c``,
    ``c + chips``, ...; for x8 parts beat ``i`` carries byte ``i`` of every word.
    """
    if cfg.device_width not in DEVICE_WIDTHS:
        raise ValidationFailure(f"device_width must be one of {DEVICE_WIDTHS}")
    size = line_bytes(cfg)
    if len(line) != size:
        raise ValidationFailure(f"expected a {size}-byte block, got {len(line)} bytes")

    width = cfg.device_width
    chips = cfg.chips_per_rank
    slices_per_word = 64 // width
    words = np.frombuffer(bytes(line), dtype="<u8").astype(np.uint64).reshape(-1, chips)
    shifts = (np.arange(slices_per_word, dtype=np.uint64) * np.uint64(width))
    mask = np.uint64((1 << width) - 1)
    # (word_of_chip, chip, slice) -> (word_of_chip, slice, chip)
    sliced = (words[:, :, None] >> shifts[None, None, :]) & mask
    return sliced.transpose(0, 2, 1).reshape(-1, chips).astype(np.uint16)


def reinterleave(layout: np.ndarray, cfg: DramConfig) -> bytes:
    """Inverse of ``deinterleave_cacheline``."""
    width = cfg.device_width
    chips = cfg.chips_per_rank
    slices_per_word = 64 // width
    beats = line_bytes(cfg) * 8 // 64
    layout = np.asarray(layout)
    if layout.shape != (beats, chips):
        raise ValidationFailure(f"layout must have shape {(beats, chips)}, got {layout.shape}")

    sliced = layout.astype(np.uint64).reshape(-1, slices_per_word, chips).transpose(0, 2, 1)
    shifts = (np.arange(slices_per_word, dtype=np.uint64) * np.uint64(width))
    words = np.bitwise_or.reduce(sliced << shifts[None, None, :], axis=2)
    return words.reshape(-1).astype("<u8").tobytes()


def chip_of_word(word_index: int, cfg: DramConfig) -> int:
    """Chip that stores word ``word_index`` of a de-interleaved block."""
    return word_index % cfg.chips_per_rank
