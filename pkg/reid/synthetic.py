"""
Synthetic stand-in for a person re-identification dataset.

Each identity gets a unit prototype on the sphere, each (identity, camera)
pair an appearance offset, and each image Gaussian noise. Samples are
normalised and optionally passed through one fixed random invertible mixing
matrix, so the identity structure is not axis-aligned for the encoder.

Camera offsets carry camera_shift**2 of energy per coordinate on average, but
all of it lies in one random viewpoint subspace of rank n_cameras. A random
projection keeps that nuisance while a trained linear encoder can learn to
suppress it. Per-sample noise is isotropic with expected norm `noise`.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from base.exceptions import DatasetFormatError, InvalidParameterError
from base.utils import l2_normalize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSpec:
    n_identities: int = 50
    images_per_identity: int = 8
    n_cameras: int = 4
    raw_dim: int = 64
    embed_dim: int = 32
    camera_shift: float = 0.3
    noise: float = 0.1
    mixing: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ('n_identities', 'images_per_identity', 'n_cameras', 'raw_dim'):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be at least 1")
        if self.embed_dim < 2:
            raise InvalidParameterError("embed_dim must be at least 2")
        if self.raw_dim < self.embed_dim:
            raise InvalidParameterError(f"raw_dim={self.raw_dim} must not be smaller than embed_dim={self.embed_dim}")
        if self.camera_shift < 0 or self.noise < 0:
            raise InvalidParameterError("camera_shift and noise must be non-negative")

    @property
    def n_samples(self):
        return self.n_identities * self.images_per_identity

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Sample:
    raw: np.ndarray
    identity: int
    camera: int
    index: int


@dataclass(frozen=True)
class Dataset:
    """
    Raw vectors with hidden ground truth. Training only ever reads `raw` and
    the sample index; identities and cameras are for evaluation.
    """
    raw: np.ndarray
    identities: np.ndarray
    cameras: np.ndarray

    def __post_init__(self):
        n = len(self.raw)
        if n == 0:
            raise DatasetFormatError("Dataset is empty")
        if self.raw.ndim != 2 or len(self.identities) != n or len(self.cameras) != n:
            raise DatasetFormatError("raw, identities and cameras must have one entry per sample")
        if not np.all(np.isfinite(self.raw)):
            raise DatasetFormatError("Dataset contains non-finite raw values")
        if np.any(self.identities < 0) or np.any(self.cameras < 0):
            raise DatasetFormatError("Identity and camera ids must be non-negative")

    def __len__(self):
        return len(self.raw)

    @property
    def raw_dim(self):
        return self.raw.shape[1]

    @property
    def n_identities(self):
        return len(np.unique(self.identities))

    @property
    def n_cameras(self):
        return len(np.unique(self.cameras))

    def __getitem__(self, index):
        return Sample(raw=self.raw[index], identity=int(self.identities[index]),
                      camera=int(self.cameras[index]), index=int(index))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def normalized_raw(self):
        return l2_normalize(self.raw)


def mixing_matrix(raw_dim, rng):
    """Random Gaussian p x p matrix, redrawn until it has full rank"""
    while True:
        matrix = rng.normal(size=(raw_dim, raw_dim)) / np.sqrt(raw_dim)
        if np.linalg.matrix_rank(matrix) == raw_dim:
            return matrix


def viewpoint_basis(raw_dim, rank, rng):
    """Orthonormal raw_dim x rank basis of the subspace camera offsets live in"""
    basis, _ = np.linalg.qr(rng.normal(size=(raw_dim, rank)))
    return basis


def generate(spec):
    """Deterministic in spec.seed"""
    rng = np.random.default_rng(spec.seed)
    p = spec.raw_dim

    prototypes = l2_normalize(rng.normal(size=(spec.n_identities, p)))
    rank = min(spec.n_cameras, p)
    basis = viewpoint_basis(p, rank, rng)
    # E||offset||^2 = camera_shift^2 * p, concentrated on `rank` directions
    coordinates = rng.normal(size=(spec.n_identities, spec.n_cameras, rank)) * spec.camera_shift * np.sqrt(p / rank)
    offsets = coordinates @ basis.T
    first_camera = rng.integers(spec.n_cameras, size=spec.n_identities)
    # E||noise|| ~ spec.noise
    noise = rng.normal(size=(spec.n_samples, p)) * spec.noise / np.sqrt(p)

    identities = np.repeat(np.arange(spec.n_identities), spec.images_per_identity)
    shot = np.tile(np.arange(spec.images_per_identity), spec.n_identities)
    # round-robin over cameras so an identity covers min(images, cameras) cameras
    cameras = (first_camera[identities] + shot) % spec.n_cameras

    raw = prototypes[identities] + offsets[identities, cameras] + noise
    raw = l2_normalize(raw)
    if spec.mixing:
        raw = raw @ mixing_matrix(p, rng).T

    logger.info(f"Generated {spec.n_samples} samples of {spec.n_identities} identities "
                f"over {spec.n_cameras} cameras (p={p}, seed={spec.seed})")
    return Dataset(raw=raw, identities=identities, cameras=cameras)


def dataset_to_frame(dataset):
    frame = pd.DataFrame(dataset.raw, columns=[f"x{k}" for k in range(dataset.raw_dim)])
    frame.insert(0, 'camera', dataset.cameras)
    frame.insert(0, 'identity', dataset.identities)
    frame.insert(0, 'index', np.arange(len(dataset)))
    return frame


def save_dataset(path, dataset):
    dataset_to_frame(dataset).to_csv(path, index=False, float_format='%.17g')


def load_dataset(path):
    """Read a dataset CSV and validate header, index contiguity and values"""
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetFormatError(f"Cannot read dataset {path}: {e}")

    columns = list(frame.columns)
    if columns[:3] != ['index', 'identity', 'camera'] or len(columns) < 4:
        raise DatasetFormatError(f"Dataset {path} must start with index,identity,camera,x0,...")
    expected = [f"x{k}" for k in range(len(columns) - 3)]
    if columns[3:] != expected:
        raise DatasetFormatError(f"Dataset {path} raw columns must be x0..x{len(expected) - 1}")
    if not np.array_equal(frame['index'].to_numpy(), np.arange(len(frame))):
        raise DatasetFormatError(f"Dataset {path} indices must be unique and contiguous from 0")

    return Dataset(
        raw=frame[expected].to_numpy(dtype=np.float64),
        identities=frame['identity'].to_numpy(dtype=np.int64),
        cameras=frame['camera'].to_numpy(dtype=np.int64),
    )
