"""
Custom exception handler and domain error classes
"""

import logging

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

logger = logging.getLogger(__name__)

VALIDATION_EXIT_CODE = 1
RUNTIME_EXIT_CODE = 2


class BusinessLogicError(Exception):
    """Base class for every domain error raised by the reid modules"""

    def __init__(self, message, code=None):
        self.message = message
        self.code = code
        super().__init__(self.message)


class InvalidParameterError(BusinessLogicError, ValueError):
    """A parameter is outside its documented range"""

    def __init__(self, message, code='invalid_parameter'):
        super().__init__(message, code)


class DimensionMismatchError(BusinessLogicError, ValueError):
    def __init__(self, message, code='dimension_mismatch'):
        super().__init__(message, code)


class NonFiniteValueError(BusinessLogicError, ValueError):
    def __init__(self, message, code='non_finite'):
        super().__init__(message, code)


class DegenerateEmbeddingError(BusinessLogicError):
    """The encoder mapped a sample to (almost) the zero vector"""

    def __init__(self, sample_index, norm, code='degenerate_embedding'):
        self.sample_index = sample_index
        self.norm = norm
        where = f"sample {sample_index}" if sample_index is not None else "input"
        super().__init__(f"Degenerate embedding for {where}: ||Wx|| = {norm:.3e}", code)


class TrainingAbortedError(BusinessLogicError):
    """Training stopped; epoch and batch locate the failure, state carries diagnostics"""

    def __init__(self, message, epoch=None, batch=None, state=None, code='training_aborted'):
        self.epoch = epoch
        self.batch = batch
        self.state = state or {}
        super().__init__(f"{message} (epoch={epoch}, batch={batch})", code)


class SnapshotFormatError(BusinessLogicError):
    def __init__(self, message, code='snapshot_format'):
        super().__init__(message, code)


class DatasetFormatError(BusinessLogicError):
    def __init__(self, message, code='dataset_format'):
        super().__init__(message, code)


VALIDATION_ERRORS = (ValidationError, InvalidParameterError, DatasetFormatError, SnapshotFormatError)


def command_exception_handler(exc, context):
    """
    Custom exception handler that turns any failure of a management command
    into a CommandError with a consistent message and exit code
    """
    command = context.get('command', 'reid')

    if isinstance(exc, CommandError):
        return exc

    if isinstance(exc, ValidationError):
        message = f"Invalid configuration: {format_validation_detail(exc.detail)}"
        return CommandError(message, returncode=VALIDATION_EXIT_CODE)

    if isinstance(exc, VALIDATION_ERRORS):
        return CommandError(f"Invalid input: {exc}", returncode=VALIDATION_EXIT_CODE)

    if isinstance(exc, TrainingAbortedError):
        logger.error(f"{command} aborted at epoch {exc.epoch}, batch {exc.batch}: {exc.message}",
                     exc_info=True)
    else:
        logger.error(f"{command} failed: {exc}", exc_info=True)

    return CommandError(f"{command} failed: {exc}", returncode=RUNTIME_EXIT_CODE)


def format_validation_detail(detail, prefix=''):
    """Flatten DRF error details into 'field: message' fragments"""
    if isinstance(detail, dict):
        parts = []
        for key, value in detail.items():
            name = f"{prefix}{key}" if key != 'non_field_errors' else prefix.rstrip('.')
            parts.append(format_validation_detail(value, f"{name}." if name else ''))
        return '; '.join(part for part in parts if part)
    if isinstance(detail, (list, tuple)):
        label = prefix.rstrip('.')
        messages = ', '.join(str(item) for item in detail)
        return f"{label}: {messages}" if label else messages
    return f"{prefix.rstrip('.')}: {detail}" if prefix else str(detail)
