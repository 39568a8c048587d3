"""Exception hierarchy and the error response model."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class PimSimError(Exception):
    """Base error carrying a machine-readable code."""

    code = "internal"
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_response(self) -> "ErrorResponse":
        return ErrorResponse(error=self.code, message=self.message, details=self.details)


class ValidationFailure(PimSimError, ValueError):
    """Input rejected before any work was done."""

    code = "invalid_input"
    exit_code = 2


class ConfigValidationError(ValidationFailure):
    """DramConfig violates one or more invariants."""

    code = "invalid_config"

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors), {"errors": list(errors)})
        self.errors = list(errors)


class UnsupportedWidthError(ValidationFailure):
    code = "unsupported_width"


class ValueOverflowError(ValidationFailure):
    code = "value_overflow"


class LengthMismatchError(ValidationFailure):
    code = "length_mismatch"


class UnknownColumnError(ValidationFailure):
    code = "unknown_column"


class SchemaError(ValidationFailure):
    code = "schema_error"


class IngestError(ValidationFailure):
    """A CSV cell or row could not be ingested."""

    code = "ingest_error"

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message, {"row": row, "column": column})
        self.row = row
        self.column = column


class StoreFormatError(ValidationFailure):
    code = "store_format"


class DanglingForeignKeyError(PimSimError, RuntimeError):
    code = "dangling_foreign_key"


class AggregateOverflowError(PimSimError, RuntimeError):
    code = "aggregate_overflow"


class ErrorResponse(BaseModel):
    """Standard error response model."""

    error: str = Field(..., description="Error type or code")
    message: str = Field(..., description="Human-readable error message")
    details: Dict[str, Any] = Field(default_factory=dict, description="Structured error context")
