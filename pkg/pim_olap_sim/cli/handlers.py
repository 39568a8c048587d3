"""Error handling shared by every command."""

import functools
import json
import logging
from typing import Any, Callable, TypeVar

import click
from pydantic import ValidationError

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import ErrorResponse, PimSimError

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3

F = TypeVar("F", bound=Callable[..., Any])


def emit_error(response: ErrorResponse) -> None:
    """Write the machine-readable error document to stderr."""
    click.echo(json.dumps(response.model_dump(), ensure_ascii=False, default=str), err=True)


def handle_errors(func: F) -> F:
    """Turn failures into an ErrorResponse on stderr and the matching exit status."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException):
            raise
        except PimSimError as e:
            logging_service.log_operation(
                "warning" if e.exit_code == EXIT_VALIDATION else "error",
                f"{ctx.command.name} failed",
                operation=ctx.command.name,
                error=e.message,
                error_code=e.code,
            )
            emit_error(e.to_response())
            ctx.exit(e.exit_code)
        except ValidationError as e:
            logging_service.log_operation(
                "warning", "Validation error", operation=ctx.command.name, error=str(e)
            )
            emit_error(
                ErrorResponse(
                    error="invalid_input",
                    message="Invalid input data",
                    details={"errors": e.errors(include_url=False)},
                )
            )
            ctx.exit(EXIT_VALIDATION)
        except OSError as e:
            logging_service.log_error("I/O error", e, operation=ctx.command.name)
            emit_error(ErrorResponse(error="io_error", message=str(e)))
            ctx.exit(EXIT_FAILURE)
        except Exception as e:
            logging_service.log_error("Unexpected error", e, operation=ctx.command.name)
            emit_error(ErrorResponse(error="internal", message="An unexpected error occurred"))
            ctx.exit(EXIT_FAILURE)

    return wrapper  # type: ignore[return-value]
