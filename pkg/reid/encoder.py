"""
Trainable embedding function: a linear map followed by L2 normalisation,
z = Wx / ||Wx||.
"""
import logging

import numpy as np

from base.exceptions import DegenerateEmbeddingError, DimensionMismatchError, InvalidParameterError
from base.utils import read_snapshot, validate_finite, write_snapshot

logger = logging.getLogger(__name__)

ENCODER_MAGIC = b'GSEW'


class LinearEncoder:
    """
    Weights have shape (d, p): raw inputs of dimension p map to d-dimensional embeddings.
    """

    def __init__(self, weights, epsilon=1e-12, step=0):
        weights = validate_finite(weights, 'weights')
        if weights.ndim != 2:
            raise DimensionMismatchError(f"Encoder weights must be a d x p matrix, got {weights.shape}")
        self.weights = np.array(weights, dtype=np.float64)
        self.epsilon = float(epsilon)
        self.step = int(step)

    @classmethod
    def initialize(cls, raw_dim, embed_dim, seed):
        """Entries i.i.d. uniform in [-1/sqrt(p), 1/sqrt(p)]"""
        if raw_dim < 1 or embed_dim < 2:
            raise InvalidParameterError(f"Encoder needs p >= 1 and d >= 2, got p={raw_dim}, d={embed_dim}")
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(raw_dim)
        return cls(rng.uniform(-bound, bound, size=(embed_dim, raw_dim)))

    @property
    def embed_dim(self):
        return self.weights.shape[0]

    @property
    def raw_dim(self):
        return self.weights.shape[1]

    def _project(self, raw, indices=None):
        raw = validate_finite(np.atleast_2d(raw), 'raw input')
        if raw.shape[1] != self.raw_dim:
            raise DimensionMismatchError(f"Raw input has dimension {raw.shape[1]}, expected {self.raw_dim}")

        projected = raw @ self.weights.T
        norms = np.linalg.norm(projected, axis=1)
        degenerate = np.flatnonzero(norms <= self.epsilon)
        if degenerate.size:
            position = int(degenerate[0])
            sample = position if indices is None else int(indices[position])
            raise DegenerateEmbeddingError(sample, float(norms[position]))
        return projected, norms

    def encode(self, x, index=None):
        """Unit-norm embedding of a single raw vector"""
        projected, norms = self._project(x, None if index is None else [index])
        return projected[0] / norms[0]

    def encode_batch(self, raw, indices=None):
        """(B, p) -> (B, d) unit-norm embeddings; indices name the samples in error messages"""
        projected, norms = self._project(raw, indices)
        return projected / norms[:, None]

    def encode_gradient(self, x, upstream):
        """
        dL/dW for one input given upstream = dL/dz:
        ((I - z z^T) / ||Wx|| . upstream) x^T
        """
        x = np.asarray(x, dtype=np.float64)
        upstream = validate_finite(upstream, 'upstream')
        return self.batch_gradient(x[None, :], upstream[None, :])

    def batch_gradient(self, raw, upstream, indices=None):
        """Sum over the batch of the per-sample dL/dW"""
        projected, norms = self._project(raw, indices)
        upstream = np.atleast_2d(upstream)
        if upstream.shape != projected.shape:
            raise DimensionMismatchError(f"Upstream gradient {upstream.shape} does not match {projected.shape}")

        z = projected / norms[:, None]
        radial = np.sum(z * upstream, axis=1, keepdims=True)
        grad_u = (upstream - radial * z) / norms[:, None]
        return grad_u.T @ np.atleast_2d(raw)

    def save(self, path):
        write_snapshot(path, ENCODER_MAGIC, self.weights, self.step)

    @classmethod
    def load(cls, path):
        weights, step = read_snapshot(path, ENCODER_MAGIC)
        return cls(weights, step=step)

    def __repr__(self):
        return f"LinearEncoder(d={self.embed_dim}, p={self.raw_dim}, step={self.step})"
