"""
In-memory look-up table of unit-norm features, one row per training sample.

Rows start out unwritten (all zero) when the table is created empty and are
filled the first time their sample is encoded. Unwritten rows never take part
in similarity-based candidate sets.
"""
import logging

import numpy as np

from base.exceptions import DimensionMismatchError, InvalidParameterError
from base.utils import read_snapshot, validate_finite, validate_unit_rows, write_snapshot

logger = logging.getLogger(__name__)

TABLE_MAGIC = b'GSLT'
DEGENERATE_NORM = 1e-9


class LookupTable:
    """
    n x d store of unit-norm features with a training-step counter.

    Single writer, many readers: similarity queries may run against a
    snapshot() while the trainer owns the live table.
    """

    def __init__(self, rows, step=0, written=None):
        rows = validate_finite(rows, 'table rows')
        if rows.ndim != 2 or rows.shape[1] < 2:
            raise DimensionMismatchError(f"Table rows must be n x d with d >= 2, got {rows.shape}")

        self._rows = np.array(rows, dtype=np.float64)
        self._written = np.ones(len(rows), dtype=bool) if written is None else np.array(written, dtype=bool)
        self.step = int(step)
        self.degenerate_updates = 0

    @classmethod
    def empty(cls, n, d):
        """Table of n unwritten rows"""
        if n < 1 or d < 2:
            raise InvalidParameterError(f"Table needs n >= 1 and d >= 2, got n={n}, d={d}")
        return cls(np.zeros((n, d)), written=np.zeros(n, dtype=bool))

    @classmethod
    def from_features(cls, features):
        try:
            features = np.asarray(features, dtype=np.float64)
        except ValueError as e:
            raise DimensionMismatchError(f"Features do not share one dimension: {e}")
        if features.ndim != 2:
            raise DimensionMismatchError(f"Features must be n x d, got shape {features.shape}")
        return cls(validate_unit_rows(features, 'features'))

    @property
    def n(self):
        return self._rows.shape[0]

    @property
    def d(self):
        return self._rows.shape[1]

    @property
    def rows(self):
        """Read-only view of the stored rows"""
        view = self._rows.view()
        view.flags.writeable = False
        return view

    @property
    def written(self):
        view = self._written.view()
        view.flags.writeable = False
        return view

    @property
    def fully_written(self):
        return bool(self._written.all())

    def snapshot(self):
        """Independent copy used as the immutable target of a training step"""
        copy = LookupTable(self._rows.copy(), step=self.step, written=self._written.copy())
        copy.degenerate_updates = self.degenerate_updates
        return copy

    def similarity_row(self, z):
        """Cosine similarities s_j = <z, m_j> against every row"""
        z = validate_unit_rows(z, 'z', dim=self.d)
        if z.ndim != 1:
            raise DimensionMismatchError(f"z must be a single vector, got shape {z.shape}")
        return self._rows @ z

    def similarity_matrix(self, features):
        """Batch form of similarity_row: (B, d) -> (B, n)"""
        features = validate_unit_rows(np.atleast_2d(features), 'features', dim=self.d)
        return features @ self._rows.T

    def _check_index(self, i):
        if not 0 <= int(i) < self.n:
            raise InvalidParameterError(f"Row index {i} is outside 0..{self.n - 1}")
        return int(i)

    def write_row(self, i, z):
        """Fill a row with z verbatim (first sighting of a sample)"""
        i = self._check_index(i)
        self._rows[i] = validate_unit_rows(z, 'z', dim=self.d)
        self._written[i] = True

    def update_row(self, i, z):
        """
        Running average m_i <- (m_i + z) / ||m_i + z||.

        Returns False and leaves the row untouched when m_i and z are antipodal.
        An unwritten row is simply filled with z.
        """
        i = self._check_index(i)
        z = validate_unit_rows(z, 'z', dim=self.d)

        if not self._written[i]:
            self._rows[i] = z
            self._written[i] = True
            return True

        total = self._rows[i] + z
        norm = np.linalg.norm(total)
        if norm < DEGENERATE_NORM:
            self.degenerate_updates += 1
            logger.warning(f"Degenerate update of table row {i} skipped (antipodal feature)")
            return False

        self._rows[i] = total / norm
        return True

    def update_rows(self, indices, features):
        """Apply update_row for every (index, feature) pair in order; returns the degenerate count"""
        features = np.atleast_2d(features)
        if len(indices) != len(features):
            raise DimensionMismatchError(f"{len(indices)} indices but {len(features)} features")
        skipped = 0
        for i, z in zip(indices, features):
            if not self.update_row(i, z):
                skipped += 1
        return skipped

    def reinitialize(self, features):
        """Overwrite every row with the current features; the step counter is preserved"""
        features = validate_unit_rows(features, 'features', dim=self.d)
        if features.ndim != 2 or len(features) != self.n:
            raise DimensionMismatchError(
                f"Reinitialisation needs {self.n} features, got {len(np.atleast_2d(features))}"
            )
        self._rows[:] = features
        self._written[:] = True
        logger.debug(f"Look-up table reinitialised at step {self.step}")

    def save(self, path):
        write_snapshot(path, TABLE_MAGIC, self._rows, self.step)

    @classmethod
    def load(cls, path):
        rows, step = read_snapshot(path, TABLE_MAGIC)
        return cls(rows, step=step)

    def __repr__(self):
        return f"LookupTable(n={self.n}, d={self.d}, step={self.step}, written={int(self._written.sum())})"


def init_table(features):
    """m_i^0 = z_i^0 for every sample"""
    return LookupTable.from_features(features)
