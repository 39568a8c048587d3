"""Functional model of the bank-level filtering unit.

Columns are packed into 64-bit words holding ``64 / width`` lanes. A comparator
is programmed once per predicate and evaluates every lane of a word; result
bits are accumulated into a bitmap that is flushed in 64-bit units.
"""

import logging
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import LengthMismatchError, UnsupportedWidthError, ValueOverflowError
from pim_olap_sim.models.kernel import (
    SUPPORTED_WIDTHS,
    Bitmap,
    CompareOp,
    ConfiguredComparator,
    PackedColumn,
    Predicate,
)

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

SIGN_BIT = np.uint64(1 << 63)


def _check_width(width: int) -> None:
    if width not in SUPPORTED_WIDTHS:
        raise UnsupportedWidthError(f"width {width} not in {SUPPORTED_WIDTHS}", {"width": width})


def _lane_shifts(width: int) -> np.ndarray:
    return np.arange(64 // width, dtype=np.uint64) * np.uint64(width)


def _lane_mask(width: int) -> np.uint64:
    return np.uint64((1 << width) - 1)


def pack_column(values: Union[Sequence[int], np.ndarray], width: int) -> PackedColumn:
    """Pack unsigned codes; element 0 occupies the low bits of word 0.

    Raises:
        UnsupportedWidthError: width not in 2, 4, 8, 16, 32, 64
        ValueOverflowError: a value does not fit the width
    """
    _check_width(width)
    raw = np.asarray(values)
    if raw.size and raw.dtype.kind not in ("i", "u"):
        raise ValueOverflowError("packed values must be integers")
    if raw.size and raw.dtype.kind == "i" and raw.min() < 0:
        raise ValueOverflowError("packed values must be non-negative", {"value": int(raw.min())})
    data = raw.astype(np.uint64).reshape(-1)
    if width < 64 and data.size and int(data.max()) >> width:
        raise ValueOverflowError(
            f"value {int(data.max())} does not fit in {width} bits",
            {"value": int(data.max()), "width": width},
        )

    lanes = 64 // width
    length = int(data.size)
    padded = np.zeros(-(-length // lanes) * lanes, dtype=np.uint64)
    padded[:length] = data
    words = np.bitwise_or.reduce(padded.reshape(-1, lanes) << _lane_shifts(width), axis=1)
    return PackedColumn(width=width, length=length, words=words.astype(np.uint64).reshape(-1))


def unpack_lanes(col: PackedColumn) -> np.ndarray:
    """``(words, lanes)`` matrix of codes, tail lanes included."""
    return (col.words[:, None] >> _lane_shifts(col.width)) & _lane_mask(col.width)


def unpack_column(col: PackedColumn) -> np.ndarray:
    return unpack_lanes(col).reshape(-1)[: col.length]


def take_codes(col: PackedColumn, rows: np.ndarray) -> np.ndarray:
    """Codes at the given row positions, without unpacking the whole column."""
    rows = np.asarray(rows, dtype=np.int64)
    lanes = 64 // col.width
    words = col.words[rows // lanes]
    shifts = (rows % lanes).astype(np.uint64) * np.uint64(col.width)
    return ((words >> shifts) & _lane_mask(col.width)).astype(np.int64 if col.width < 64 else np.uint64)


def compile_predicate(p: Predicate, width: int) -> ConfiguredComparator:
    """Program a comparator block for ``p`` at ``width``.

    Raises:
        ValueOverflowError: an operand does not fit the width
    """
    _check_width(width)
    limit = (1 << width) - 1
    for operand in (p.value, p.high):
        if operand is not None and operand > limit:
            raise ValueOverflowError(
                f"operand {operand} does not fit in {width} bits",
                {"operand": operand, "width": width},
            )

    lanes = 64 // width

    def broadcast(operand: int) -> int:
        word = 0
        for lane in range(lanes):
            word |= operand << (lane * width)
        return word

    return ConfiguredComparator(
        width=width,
        op=p.op,
        low=p.value,
        high=p.high,
        broadcast_low=broadcast(p.value),
        broadcast_high=broadcast(p.high) if p.high is not None else None,
        lane_shifts=_lane_shifts(width),
        lane_mask=limit,
    )


def evaluate_words(words: np.ndarray, cmp: ConfiguredComparator) -> np.ndarray:
    """Boolean ``(words, lanes)`` result of the comparator on every lane."""
    mask = np.uint64(cmp.lane_mask)
    if cmp.op in (CompareOp.EQ, CompareOp.NEQ):
        # a lane matches when it XORs to zero against the broadcast operand
        diff = (words ^ np.uint64(cmp.broadcast_low))[:, None] >> cmp.lane_shifts
        equal = (diff & mask) == 0
        return equal if cmp.op == CompareOp.EQ else ~equal

    lanes = (words[:, None] >> cmp.lane_shifts) & mask
    low = np.uint64(cmp.low)
    if cmp.op == CompareOp.LT:
        return lanes < low
    if cmp.op == CompareOp.LE:
        return lanes <= low
    if cmp.op == CompareOp.GT:
        return lanes > low
    if cmp.op == CompareOp.GE:
        return lanes >= low
    return (lanes >= low) & (lanes <= np.uint64(cmp.high))


def filter_column(col: PackedColumn, cmp: ConfiguredComparator, acc: Optional[Bitmap] = None) -> Bitmap:
    """Evaluate ``cmp`` on every element; AND into ``acc`` when given.

    Raises:
        LengthMismatchError: ``acc`` length or comparator width does not match the column
    """
    if cmp.width != col.width:
        raise LengthMismatchError(f"comparator width {cmp.width} != column width {col.width}")
    if acc is not None and acc.length != col.length:
        raise LengthMismatchError(f"accumulator length {acc.length} != column length {col.length}")

    hits = evaluate_words(col.words, cmp).reshape(-1)[: col.length]
    result = Bitmap.from_bools(hits)
    if acc is not None:
        return bitmap_and(acc, result)
    return result


def _check_lengths(a: Bitmap, b: Bitmap) -> None:
    if a.length != b.length:
        raise LengthMismatchError(f"bitmap lengths differ: {a.length} != {b.length}")


def bitmap_and(a: Bitmap, b: Bitmap) -> Bitmap:
    _check_lengths(a, b)
    return Bitmap(words=a.words & b.words, length=a.length)


def bitmap_or(a: Bitmap, b: Bitmap) -> Bitmap:
    _check_lengths(a, b)
    return Bitmap(words=a.words | b.words, length=a.length)


def bitmap_not(a: Bitmap) -> Bitmap:
    return bitmap_and(Bitmap(words=~a.words, length=a.length), Bitmap.ones(a.length))


def popcount(a: Bitmap) -> int:
    return int(np.unpackbits(a.words.astype("<u8").view(np.uint8)).sum())


def iter_set_bits(a: Bitmap) -> Iterator[int]:
    """Set-bit indices in ascending order, by trailing-zero extraction per word."""
    for index in np.flatnonzero(a.words).tolist():
        word = int(a.words[index])
        base = index * 64
        while word:
            lowest = word & -word
            yield base + lowest.bit_length() - 1
            word ^= lowest


def set_bit_positions(a: Bitmap) -> np.ndarray:
    """All set-bit indices at once; same order as ``iter_set_bits``."""
    return np.flatnonzero(a.to_bools()).astype(np.int64)


def float_to_ordered(values: np.ndarray) -> np.ndarray:
    """Monotone map from float64 to uint64: ``a < b`` iff ``f(a) < f(b)`` (NaN excluded)."""
    bits = np.asarray(values, dtype=np.float64).view(np.uint64)
    negative = (bits & SIGN_BIT) != 0
    return np.where(negative, ~bits, bits | SIGN_BIT)


def ordered_to_float(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    positive = (codes & SIGN_BIT) != 0
    bits = np.where(positive, codes & ~SIGN_BIT, ~codes)
    return bits.view(np.float64)
