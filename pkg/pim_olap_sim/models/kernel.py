"""Bit-packed columns, bitmaps, predicates and configured comparators."""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


SUPPORTED_WIDTHS = (2, 4, 8, 16, 32, 64)


class PackedColumn(BaseModel):
    """Fixed-width codes packed into 64-bit words, element 0 in the low bits."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int
    length: int = Field(..., ge=0)
    words: np.ndarray

    @field_validator("width")
    @classmethod
    def validate_width(cls, v: int) -> int:
        if v not in SUPPORTED_WIDTHS:
            raise ValueError(f"width must be one of {SUPPORTED_WIDTHS}, got {v}")
        return v

    @model_validator(mode="after")
    def validate_word_count(self) -> "PackedColumn":
        expected = -(-self.length * self.width // 64)
        if self.words.dtype != np.uint64 or self.words.shape != (expected,):
            raise ValueError(f"expected {expected} uint64 words for {self.length} x {self.width}-bit elements")
        return self

    @property
    def lanes(self) -> int:
        return 64 // self.width

    @property
    def nbytes(self) -> int:
        return int(self.words.size) * 8


class Bitmap(BaseModel):
    """Selection bit vector; bit i of word i // 64 belongs to element i."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    words: np.ndarray
    length: int = Field(..., ge=0)

    @model_validator(mode="after")
    def validate_words(self) -> "Bitmap":
        if self.words.dtype != np.uint64 or self.words.shape != (-(-self.length // 64),):
            raise ValueError("bitmap word count does not match its length")
        return self

    @classmethod
    def zeros(cls, length: int) -> "Bitmap":
        return cls(words=np.zeros(-(-length // 64), dtype=np.uint64), length=length)

    @classmethod
    def ones(cls, length: int) -> "Bitmap":
        return cls.from_bools(np.ones(length, dtype=bool))

    @classmethod
    def from_bools(cls, bits: np.ndarray) -> "Bitmap":
        bits = np.asarray(bits, dtype=bool)
        length = int(bits.size)
        packed = np.packbits(bits, bitorder="little")
        padded = np.zeros(-(-length // 64) * 8, dtype=np.uint8)
        padded[: packed.size] = packed
        return cls(words=padded.view("<u8").astype(np.uint64), length=length)

    def to_bools(self) -> np.ndarray:
        raw = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return raw[: self.length].astype(bool)

    @property
    def nbytes(self) -> int:
        return int(self.words.size) * 8


class CompareOp(str, Enum):
    EQ = "eq"
    NEQ = "neq"
    LT = "lt"
    LE = "le"
    GT = "gt"
    GE = "ge"
    BETWEEN = "between"


class Predicate(BaseModel):
    """Comparison of one packed column against unsigned operand(s)."""

    model_config = ConfigDict(frozen=True)

    op: CompareOp
    value: int = Field(..., ge=0)
    high: Optional[int] = Field(default=None, ge=0)
    column_id: str = ""

    @model_validator(mode="after")
    def validate_between(self) -> "Predicate":
        if self.op == CompareOp.BETWEEN:
            if self.high is None:
                raise ValueError("between requires a high operand")
            if self.value > self.high:
                raise ValueError("between requires low <= high")
        return self

    @classmethod
    def always_false(cls, column_id: str = "") -> "Predicate":
        return cls(op=CompareOp.LT, value=0, column_id=column_id)

    @classmethod
    def always_true(cls, column_id: str = "") -> "Predicate":
        return cls(op=CompareOp.GE, value=0, column_id=column_id)

    def matches(self, code: int) -> bool:
        """Scalar evaluation, used by oracles and host fallbacks."""
        if self.op == CompareOp.EQ:
            return code == self.value
        if self.op == CompareOp.NEQ:
            return code != self.value
        if self.op == CompareOp.LT:
            return code < self.value
        if self.op == CompareOp.LE:
            return code <= self.value
        if self.op == CompareOp.GT:
            return code > self.value
        if self.op == CompareOp.GE:
            return code >= self.value
        return self.value <= code <= self.high


class ConfiguredComparator(BaseModel):
    """A comparator block programmed for one width, op and operand set."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int
    op: CompareOp
    low: int
    high: Optional[int] = None
    broadcast_low: int
    broadcast_high: Optional[int] = None
    lane_shifts: np.ndarray
    lane_mask: int

    @property
    def lanes(self) -> int:
        return int(self.lane_shifts.size)
