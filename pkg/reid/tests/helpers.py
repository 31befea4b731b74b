from pathlib import Path

import numpy as np

from reid.feature_store import init_table
from reid.synthetic import DatasetSpec

A, B, C, D = range(4)

THRESHOLD_FIXTURE = Path(__file__).resolve().parent / 'fixtures' / 'trend_thresholds.yaml'

# small, well separated dataset that trains in well under a second
TINY_SPEC = DatasetSpec(
    n_identities=10, images_per_identity=4, n_cameras=2, raw_dim=16, embed_dim=8,
    camera_shift=0.1, noise=0.05, mixing=False, seed=3,
)

TINY_FLAGS = [
    '--ids', '10', '--per-id', '4', '--cameras', '2', '--raw-dim', '16', '--embed-dim', '8',
    '--camera-shift', '0.1', '--noise', '0.05', '--no-mixing',
    '--batch', '16', '--warmup', '1', '--reinit-every', '2',
]


def planar(degrees):
    radians = np.deg2rad(degrees)
    return np.array([np.cos(radians), np.sin(radians)])


def four_node_features():
    """Unit vectors at 0, 10, 80 and 90 degrees"""
    features = np.array([planar(0), planar(10), planar(80), planar(90)])
    # exact axes keep the example free of rounding noise
    features[A] = [1.0, 0.0]
    features[D] = [0.0, 1.0]
    return features


def four_node_table():
    return init_table(four_node_features())


def random_unit(rng, n, d):
    values = rng.normal(size=(n, d))
    return values / np.linalg.norm(values, axis=1, keepdims=True)


def random_label(rng, n, owner, p_positive=0.3):
    label = rng.random(n) < p_positive
    label[owner] = True
    return label


def relative_error(analytic, numeric):
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / scale


def central_difference(function, point, h=1e-6):
    point = np.array(point, dtype=np.float64)
    grad = np.zeros_like(point)
    for position in np.ndindex(point.shape):
        step = np.zeros_like(point)
        step[position] = h
        grad[position] = (function(point + step) - function(point - step)) / (2 * h)
    return grad
