import logging
import os
from pathlib import Path

import numpy as np
import yaml

from .exceptions import (
    DimensionMismatchError, InvalidParameterError, NonFiniteValueError, SnapshotFormatError,
)

logger = logging.getLogger(__name__)

UNIT_NORM_TOLERANCE = 1e-6

# magic, two u32 dimensions and a u64 step counter, little-endian
SNAPSHOT_HEADER = np.dtype([
    ('magic', 'S4'),
    ('rows', '<u4'),
    ('cols', '<u4'),
    ('step', '<u8'),
])


def validate_finite(values, name='values'):
    """
    Raise NonFiniteValueError if the array holds NaN or infinity.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))
        raise NonFiniteValueError(f"{name} contains non-finite values at {bad[:5].tolist()}")
    return values


def validate_unit_rows(values, name='features', dim=None):
    """
    Validate a vector or a stack of vectors: finite, the expected dimension,
    and unit L2 norm within UNIT_NORM_TOLERANCE.

    Returns a float64 copy shaped (n, d) for stacks or (d,) for a single vector.
    """
    values = validate_finite(values, name)
    if values.ndim not in (1, 2):
        raise DimensionMismatchError(f"{name} must be a vector or a matrix, got shape {values.shape}")
    if dim is not None and values.shape[-1] != dim:
        raise DimensionMismatchError(f"{name} has dimension {values.shape[-1]}, expected {dim}")

    norms = np.linalg.norm(np.atleast_2d(values), axis=1)
    off = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE)
    if off.size:
        raise InvalidParameterError(
            f"{name} must be unit-norm; row {int(off[0])} has norm {norms[off[0]]:.9f}"
        )
    return values.copy()


def validate_range(value, name, low=None, high=None, low_inclusive=True, high_inclusive=True):
    """
    Check low <(=) value <(=) high and raise InvalidParameterError naming the
    interval otherwise, e.g. "tau=-1.0 must lie in (-1, 1]".
    """
    below = low is not None and (value < low or (value == low and not low_inclusive))
    above = high is not None and (value > high or (value == high and not high_inclusive))
    if below or above:
        opening = '[' if low is not None and low_inclusive else '('
        closing = ']' if high is not None and high_inclusive else ')'
        lower = '-inf' if low is None else f"{low:g}"
        upper = 'inf' if high is None else f"{high:g}"
        raise InvalidParameterError(f"{name}={value} must lie in {opening}{lower}, {upper}{closing}")
    return value


def l2_normalize(values, epsilon=1e-12):
    """
    Row-wise L2 normalisation; rows with norm <= epsilon are returned unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    return np.where(norms > epsilon, values / np.maximum(norms, epsilon), values)


def load_config_file(path):
    """
    Read a YAML run config. Both a flat mapping and the sectioned layout
    (dataset / train / evaluation) are accepted; the result is always sectioned.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"Config file {path} does not exist", code='missing_config')

    with open(path, 'r', encoding='utf-8') as handle:
        try:
            raw = yaml.safe_load(handle) or {}
        except yaml.YAMLError as e:
            raise InvalidParameterError(f"Config file {path} is not valid YAML: {e}", code='bad_config')

    if not isinstance(raw, dict):
        raise InvalidParameterError(f"Config file {path} must contain a mapping", code='bad_config')

    sections = {'dataset': {}, 'train': {}, 'evaluation': {}}
    for key, value in raw.items():
        if key in sections and isinstance(value, dict):
            sections[key].update(value)
        else:
            sections.setdefault('extra', {})[key] = value

    logger.debug(f"Loaded config file {path} with sections {sorted(sections)}")
    return sections


def ensure_output_dir(path):
    """Create the output directory if needed and make sure it is writable"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"Output directory {path} is not writable")
    return path


def write_snapshot(path, magic, matrix, step):
    """
    Write a row-major float64 matrix behind a SNAPSHOT_HEADER record.
    """
    matrix = np.ascontiguousarray(matrix, dtype='<f8')
    header = np.array([(magic, matrix.shape[0], matrix.shape[1], step)], dtype=SNAPSHOT_HEADER)
    with open(path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(matrix.tobytes())
    logger.debug(f"Wrote {magic.decode()} snapshot {matrix.shape} to {path}")


def read_snapshot(path, magic):
    """
    Read a snapshot written by write_snapshot; returns (matrix, step).
    """
    path = Path(path)
    if not path.exists():
        raise SnapshotFormatError(f"Snapshot {path} does not exist")

    payload = path.read_bytes()
    if len(payload) < SNAPSHOT_HEADER.itemsize:
        raise SnapshotFormatError(f"Snapshot {path} is truncated")

    header = np.frombuffer(payload[:SNAPSHOT_HEADER.itemsize], dtype=SNAPSHOT_HEADER)[0]
    if header['magic'] != magic:
        raise SnapshotFormatError(
            f"Snapshot {path} has magic {header['magic']!r}, expected {magic!r}"
        )

    rows, cols = int(header['rows']), int(header['cols'])
    body = payload[SNAPSHOT_HEADER.itemsize:]
    if len(body) != rows * cols * 8:
        raise SnapshotFormatError(
            f"Snapshot {path} holds {len(body)} bytes of data, expected {rows * cols * 8}"
        )

    matrix = np.frombuffer(body, dtype='<f8').reshape(rows, cols).astype(np.float64)
    return matrix, int(header['step'])
