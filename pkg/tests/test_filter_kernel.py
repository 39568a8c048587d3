"""Tests for the packed-word filtering unit and bitmap helpers."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pim_olap_sim.models.errors import LengthMismatchError, UnsupportedWidthError, ValueOverflowError
from pim_olap_sim.models.kernel import SUPPORTED_WIDTHS, Bitmap, CompareOp, Predicate
from pim_olap_sim.services.filter_kernel import (
    bitmap_and,
    bitmap_not,
    bitmap_or,
    compile_predicate,
    filter_column,
    float_to_ordered,
    iter_set_bits,
    ordered_to_float,
    pack_column,
    popcount,
    set_bit_positions,
    take_codes,
    unpack_column,
)

SINGLE_OPS = [op for op in CompareOp if op != CompareOp.BETWEEN]


@st.composite
def column_strategy(draw, widths=SUPPORTED_WIDTHS, max_size=300):
    """Generate a width and a list of codes that fit it."""
    width = draw(st.sampled_from(widths))
    values = draw(st.lists(st.integers(min_value=0, max_value=(1 << width) - 1), max_size=max_size))
    return width, values


@st.composite
def predicate_strategy(draw, width):
    """Generate a predicate whose operands fit ``width``."""
    limit = (1 << width) - 1
    op = draw(st.sampled_from(list(CompareOp)))
    low = draw(st.integers(min_value=0, max_value=limit))
    if op == CompareOp.BETWEEN:
        high = draw(st.integers(min_value=low, max_value=limit))
        return Predicate(op=op, value=low, high=high)
    return Predicate(op=op, value=low)


def naive_scan(values, predicate):
    return [predicate.matches(v) for v in values]


@settings(max_examples=10_000, deadline=None)
@given(column_strategy(max_size=200), st.data())
def test_filter_matches_naive_scan(column, data):
    """The word-parallel comparator agrees with a scalar scan on every element."""
    width, values = column
    predicate = data.draw(predicate_strategy(width))
    packed = pack_column(np.array(values, dtype=np.uint64), width)

    result = filter_column(packed, compile_predicate(predicate, width))

    assert result.length == len(values)
    assert result.to_bools().tolist() == naive_scan(values, predicate)


@given(column_strategy())
def test_pack_preserves_codes(column):
    """Unpacking returns the original codes in order."""
    width, values = column
    packed = pack_column(np.array(values, dtype=np.uint64), width)

    assert packed.words.size == -(-len(values) * width // 64)
    assert [int(v) for v in unpack_column(packed)] == values


@given(column_strategy(widths=(2, 4, 8, 16, 32)), st.data())
def test_take_codes_reads_individual_rows(column, data):
    """Random access by row agrees with a full unpack."""
    width, values = column
    if not values:
        return
    rows = data.draw(st.lists(st.integers(min_value=0, max_value=len(values) - 1), max_size=20))
    packed = pack_column(np.array(values, dtype=np.uint64), width)

    assert take_codes(packed, np.array(rows, dtype=np.int64)).tolist() == [values[r] for r in rows]


@pytest.mark.parametrize("width", [2, 4])
def test_exhaustive_small_widths(width):
    """Every op and operand against every code of a narrow width."""
    codes = list(range(1 << width)) * 5
    packed = pack_column(codes, width)

    for op in SINGLE_OPS:
        for operand in range(1 << width):
            predicate = Predicate(op=op, value=operand)
            got = filter_column(packed, compile_predicate(predicate, width)).to_bools().tolist()
            assert got == naive_scan(codes, predicate), (op, operand)

    for low, high in itertools.combinations_with_replacement(range(1 << width), 2):
        predicate = Predicate(op=CompareOp.BETWEEN, value=low, high=high)
        got = filter_column(packed, compile_predicate(predicate, width)).to_bools().tolist()
        assert got == naive_scan(codes, predicate), (low, high)


class TestKernelErrors:
    """Width, overflow and length checks."""

    def test_unsupported_width(self):
        with pytest.raises(UnsupportedWidthError):
            pack_column([1, 2], 3)
        with pytest.raises(UnsupportedWidthError):
            compile_predicate(Predicate(op=CompareOp.EQ, value=1), 12)

    def test_value_does_not_fit(self):
        with pytest.raises(ValueOverflowError):
            pack_column([0, 1, 4], 2)
        with pytest.raises(ValueOverflowError):
            pack_column([-1], 8)

    def test_operand_does_not_fit(self):
        with pytest.raises(ValueOverflowError):
            compile_predicate(Predicate(op=CompareOp.LT, value=16), 4)
        with pytest.raises(ValueOverflowError):
            compile_predicate(Predicate(op=CompareOp.BETWEEN, value=1, high=300), 8)

    def test_between_needs_ordered_bounds(self):
        with pytest.raises(ValueError):
            Predicate(op=CompareOp.BETWEEN, value=5, high=2)
        with pytest.raises(ValueError):
            Predicate(op=CompareOp.BETWEEN, value=5)

    def test_accumulator_length_mismatch(self):
        packed = pack_column([1, 2, 3], 8)
        cmp = compile_predicate(Predicate(op=CompareOp.GE, value=0), 8)
        with pytest.raises(LengthMismatchError):
            filter_column(packed, cmp, Bitmap.ones(4))

    def test_comparator_width_mismatch(self):
        packed = pack_column([1, 2, 3], 8)
        with pytest.raises(LengthMismatchError):
            filter_column(packed, compile_predicate(Predicate(op=CompareOp.EQ, value=1), 16))


class TestBitmaps:
    """Bitmap algebra and set-bit iteration."""

    @pytest.fixture
    def mixed(self):
        bits = np.zeros(130, dtype=bool)
        bits[[0, 5, 63, 64, 100, 129]] = True
        return Bitmap.from_bools(bits)

    def test_accumulator_ands_conjuncts(self):
        packed = pack_column([1, 5, 9, 5, 2], 8)
        first = filter_column(packed, compile_predicate(Predicate(op=CompareOp.GT, value=1), 8))
        both = filter_column(packed, compile_predicate(Predicate(op=CompareOp.LT, value=9), 8), first)

        assert both.to_bools().tolist() == [False, True, False, True, True]

    def test_not_keeps_tail_clear(self, mixed):
        inverted = bitmap_not(mixed)

        assert popcount(inverted) == 130 - 6
        assert int(inverted.words[-1]) >> 2 == 0

    def test_and_or(self, mixed):
        empty = Bitmap.zeros(130)
        assert popcount(bitmap_and(mixed, empty)) == 0
        assert popcount(bitmap_or(mixed, empty)) == 6
        assert popcount(bitmap_or(mixed, bitmap_not(mixed))) == 130

    def test_length_mismatch(self, mixed):
        with pytest.raises(LengthMismatchError):
            bitmap_and(mixed, Bitmap.zeros(129))

    def test_set_bits_in_order(self, mixed):
        assert list(iter_set_bits(mixed)) == [0, 5, 63, 64, 100, 129]
        assert set_bit_positions(mixed).tolist() == [0, 5, 63, 64, 100, 129]

    def test_empty_bitmap(self):
        empty = Bitmap.zeros(0)
        assert popcount(empty) == 0
        assert list(iter_set_bits(empty)) == []


@given(st.lists(st.booleans(), max_size=500))
def test_set_bit_iteration_matches_positions(bits):
    """Trailing-zero extraction yields exactly the set positions."""
    bitmap = Bitmap.from_bools(np.array(bits, dtype=bool))

    expected = [i for i, bit in enumerate(bits) if bit]
    assert list(iter_set_bits(bitmap)) == expected
    assert popcount(bitmap) == len(expected)


@given(st.lists(st.floats(allow_nan=False), min_size=2, max_size=50))
def test_float_ordering_is_monotone(values):
    """Ordered codes sort the same way as the floats they encode."""
    floats = np.array(values, dtype=np.float64)
    codes = float_to_ordered(floats)

    for a, b, ca, cb in zip(floats, floats[1:], codes, codes[1:]):
        if a < b:
            assert ca < cb
        if ca < cb:
            assert a <= b
    assert np.array_equal(ordered_to_float(codes).view(np.uint64), floats.view(np.uint64))
