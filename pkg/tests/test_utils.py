"""
Test suite for shared utilities: validation helpers, response envelopes,
fingerprints and domain exceptions.
"""

import logging

import numpy as np
import pytest

from ssl_curriculum.utils import (
    PermutationFileError,
    TrainingError,
    configure_logging,
    create_error_response,
    create_success_response,
    fingerprint,
    logged_command,
    validate_fraction,
    validate_positive_int,
    validate_positive_number,
    validate_probability,
)


class TestValidation:
    """Test input validation helpers."""

    def test_validate_positive_int(self):
        """Integers within bounds pass through unchanged."""
        assert validate_positive_int(5, "n") == 5
        assert validate_positive_int(0, "seed", min_value=0) == 0

        with pytest.raises(ValueError, match="must be an integer"):
            validate_positive_int(2.5, "n")
        with pytest.raises(ValueError, match="must be an integer"):
            validate_positive_int(True, "n")
        with pytest.raises(ValueError, match="must be at least 2"):
            validate_positive_int(1, "grid_n", min_value=2)
        with pytest.raises(ValueError, match="less than or equal to 24"):
            validate_positive_int(25, "set_size", max_value=24)

    def test_validate_positive_int_numpy_scalars(self):
        """numpy integer scalars are accepted and come back as plain ints."""
        value = validate_positive_int(np.int64(3), "k")
        assert value == 3
        assert type(value) is int
        assert validate_positive_int(np.uint8(0), "seed", min_value=0) == 0

        with pytest.raises(ValueError, match="must be an integer"):
            validate_positive_int(np.float64(3.0), "k")
        with pytest.raises(ValueError, match="must be an integer"):
            validate_positive_int(np.bool_(True), "k")
        with pytest.raises(ValueError, match="less than or equal to 4"):
            validate_positive_int(np.int32(5), "k", max_value=4)

    def test_validate_fraction(self):
        """Fractions lie in (0, 1] unless zero is allowed."""
        assert validate_fraction(1, "retention") == 1.0
        assert validate_fraction(0.8, "retention") == 0.8
        assert validate_fraction(0.0, "p", allow_zero=True) == 0.0

        with pytest.raises(ValueError, match="greater than 0"):
            validate_fraction(0.0, "retention")
        with pytest.raises(ValueError, match="less than or equal to 1"):
            validate_fraction(1.01, "retention")
        with pytest.raises(ValueError, match="NaN"):
            validate_fraction(float("nan"), "retention")
        with pytest.raises(ValueError, match="must be a number"):
            validate_fraction("0.5", "retention")

    def test_validate_probability(self):
        """Probabilities accept both endpoints."""
        assert validate_probability(0.0) == 0.0
        assert validate_probability(1.0) == 1.0
        with pytest.raises(ValueError):
            validate_probability(-0.1)

    def test_validate_positive_number(self):
        """Strictly positive finite numbers only."""
        assert validate_positive_number(0.001, "learning_rate") == 0.001
        with pytest.raises(ValueError, match="greater than 0"):
            validate_positive_number(0, "learning_rate")
        with pytest.raises(ValueError, match="greater than 0"):
            validate_positive_number(float("inf"), "learning_rate")


class TestResponses:
    """Test success and error envelopes."""

    def test_success_response(self):
        """Success envelopes carry data, timestamp and optional metadata."""
        result = create_success_response({"x": 1}, metadata={"seed": 3})
        assert result["success"] is True
        assert result["data"] == {"x": 1}
        assert result["metadata"] == {"seed": 3}
        assert isinstance(result["timestamp"], int)

    def test_error_response_sanitizes_message(self):
        """Control characters are stripped from error messages."""
        result = create_error_response("validation_error", "bad\x00 value\x07", {"field": "k"})
        assert result["success"] is False
        assert result["error"]["type"] == "validation_error"
        assert result["error"]["message"] == "bad value"
        assert result["error"]["details"] == {"field": "k"}

    def test_error_response_non_string_message(self):
        """Non-string messages are replaced by a generic one."""
        result = create_error_response("runtime_error", None)
        assert result["error"]["message"] == "An error occurred"


class TestFingerprint:
    """Test stable payload hashing."""

    def test_key_order_does_not_matter(self):
        """Equal mappings hash identically regardless of insertion order."""
        assert fingerprint({"a": 1, "b": [1, 2]}) == fingerprint({"b": [1, 2], "a": 1})

    def test_length_and_sensitivity(self):
        """Fingerprints are 16 hex characters and change with the payload."""
        value = fingerprint({"a": 1})
        assert len(value) == 16
        int(value, 16)
        assert value != fingerprint({"a": 2})


class TestExceptions:
    """Test domain exception messages."""

    def test_permutation_file_error_names_line(self):
        """The offending line number prefixes the message."""
        error = PermutationFileError("duplicate permutation", 4)
        assert error.line_number == 4
        assert str(error).startswith("line 4:")
        assert isinstance(error, ValueError)

    def test_training_error_names_level(self):
        """The failing curriculum level prefixes the message."""
        error = TrainingError("label out of range", level_index=2)
        assert error.level_index == 2
        assert "curriculum level 2" in str(error)


class TestLogging:
    """Test logging setup and the command decorator."""

    def test_configure_logging_rejects_unknown_level(self):
        """Unknown level names raise ValueError."""
        with pytest.raises(ValueError, match="Invalid log level"):
            configure_logging("chatty")

    def test_logged_command_passes_result_through(self, caplog):
        """The decorator logs start and outcome and returns the envelope unchanged."""
        @logged_command
        def sample_command(value):
            return create_success_response({"value": value})

        with caplog.at_level(logging.INFO, logger="ssl_curriculum.utils"):
            result = sample_command(np.int64(3))

        assert result["data"]["value"] == 3
        messages = " ".join(record.getMessage() for record in caplog.records)
        assert "Command started: sample_command" in messages
        assert "Command succeeded: sample_command" in messages

    def test_logged_command_logs_failures(self, caplog):
        """Error envelopes are logged as warnings."""
        @logged_command
        def failing_command():
            return create_error_response("validation_error", "nope")

        with caplog.at_level(logging.INFO, logger="ssl_curriculum.utils"):
            result = failing_command()

        assert result["success"] is False
        assert any(r.levelno == logging.WARNING and "validation_error" in r.getMessage() for r in caplog.records)
