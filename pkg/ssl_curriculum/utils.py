"""
Shared utilities for ssl-curriculum.

This module provides common functionality used across all modules and
commands, including logging setup, input validation, result envelopes,
fingerprints and the domain exception types.
"""

import re
import sys
import time
import json
import hashlib
import logging
import numbers
from functools import wraps
from typing import Dict, Any, Optional, Callable

logger = logging.getLogger(__name__)


LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class PermutationFileError(ValueError):
    """Raised when a permutation-set file cannot be parsed or validated."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DatasetFormatError(ValueError):
    """Raised when a dataset file does not follow the expected binary layout."""


class UsageError(ValueError):
    """Raised when command options conflict or a required input is missing."""


class SchemaMismatchError(ValueError):
    """Raised when run records with different metric schemas are combined."""


class CheckpointMismatchError(RuntimeError):
    """Raised when a checkpoint's spec fingerprint does not match the expected one."""


class TrainingError(RuntimeError):
    """
    Raised when training fails inside a curriculum level.

    Attributes:
        level_index: Position of the failing level in the schedule
    """

    def __init__(self, message: str, level_index: Optional[int] = None):
        self.level_index = level_index
        if level_index is not None:
            message = f"curriculum level {level_index}: {message}"
        super().__init__(message)


def configure_logging(level: str = "INFO") -> None:
    """
    Configure root logging once for the CLI process.

    Args:
        level: Log level name (DEBUG, INFO, WARNING, ERROR)
    """
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise ValueError(f"Invalid log level: {level}")

    logging.basicConfig(level=numeric, format=LOG_FORMAT, stream=sys.stderr, force=True)


def fingerprint(payload: Any) -> str:
    """
    Create a short stable hash of a JSON-serializable payload.

    Keys are sorted so that equal mappings always hash identically.

    Args:
        payload: Any JSON-serializable value

    Returns:
        str: First 16 hex characters of the SHA-256 digest
    """
    encoded = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(encoded.encode('utf-8')).hexdigest()[:16]


def create_error_response(error_type: str, message: str, details: Optional[Dict] = None) -> Dict[str, Any]:
    """
    Create a standardized error envelope for command results.

    Args:
        error_type: Category of the error (e.g., 'validation_error', 'format_error')
        message: Human-readable error message
        details: Optional additional error details

    Returns:
        Dict containing standardized error response
    """
    response = {
        "success": False,
        "error": {
            "type": error_type,
            "message": _sanitize_message(message),
            "timestamp": int(time.time() * 1000)
        }
    }

    if details:
        response["error"]["details"] = details

    return response


def create_success_response(data: Any, metadata: Optional[Dict] = None) -> Dict[str, Any]:
    """
    Create a standardized success envelope for command results.

    Args:
        data: The response data
        metadata: Optional metadata about the response

    Returns:
        Dict containing standardized success response
    """
    response = {
        "success": True,
        "data": data,
        "timestamp": int(time.time() * 1000)
    }

    if metadata:
        response["metadata"] = metadata

    return response


def _sanitize_message(message: Any) -> str:
    """Strip control characters and cap length so messages stay one printable line."""
    if not isinstance(message, str):
        return "An error occurred"
    cleaned = re.sub(r'[\x00-\x08\x0b-\x1f\x7f]', '', message)
    return cleaned[:2000]


def logged_command(func: Callable) -> Callable:
    """
    Decorator that logs command invocation and outcome.

    The wrapped function must return a success or error envelope.
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        call_id = fingerprint([func.__name__, time.time_ns()])[:8]
        logger.info(f"Command started: {func.__name__} [{call_id}]")

        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.error(f"Command raised: {func.__name__} [{call_id}] {type(e).__name__}: {e}")
            raise

        if isinstance(result, dict) and result.get("success"):
            logger.info(f"Command succeeded: {func.__name__} [{call_id}]")
        else:
            error = result.get("error", {}) if isinstance(result, dict) else {}
            logger.warning(
                f"Command failed: {func.__name__} [{call_id}] "
                f"{error.get('type')}: {error.get('message')}"
            )
        return result

    return wrapper


def validate_positive_int(value: Any, field_name: str, min_value: int = 1, max_value: Optional[int] = None) -> int:
    """
    Validate that a value is an integer within bounds.

    Args:
        value: The value to validate
        field_name: Name of the field for error messages
        min_value: Minimum acceptable value (inclusive)
        max_value: Maximum acceptable value (inclusive, optional)

    Returns:
        int: The validated value

    Raises:
        ValueError: If value is invalid
    """
    # numpy integer scalars count; booleans do not
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{field_name} must be an integer")
    value = int(value)

    if value < min_value:
        raise ValueError(f"{field_name} must be at least {min_value}")

    if max_value is not None and value > max_value:
        raise ValueError(f"{field_name} must be less than or equal to {max_value}")

    return value


def validate_fraction(value: Any, field_name: str, allow_zero: bool = False) -> float:
    """
    Validate a fraction in (0, 1], or [0, 1] when allow_zero is set.

    Args:
        value: The numeric value to validate
        field_name: Name of the field for error messages
        allow_zero: Accept 0 as a valid value

    Returns:
        float: The validated value

    Raises:
        ValueError: If value is invalid
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{field_name} must be a number")

    value = float(value)
    if value != value:
        raise ValueError(f"{field_name} must not be NaN")

    if value > 1.0:
        raise ValueError(f"{field_name} must be less than or equal to 1")

    if allow_zero:
        if value < 0.0:
            raise ValueError(f"{field_name} must be between 0 and 1")
    elif value <= 0.0:
        raise ValueError(f"{field_name} must be greater than 0")

    return value


def validate_probability(value: Any, field_name: str = "probability") -> float:
    """Validate a probability in [0, 1]."""
    return validate_fraction(value, field_name, allow_zero=True)


def validate_positive_number(value: Any, field_name: str) -> float:
    """
    Validate that a numeric value is strictly positive and finite.

    Raises:
        ValueError: If value is invalid
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{field_name} must be a number")

    if not (value > 0.0) or value == float("inf"):
        raise ValueError(f"{field_name} must be greater than 0")

    return float(value)
