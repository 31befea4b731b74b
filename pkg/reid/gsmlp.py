"""
Graph-structure based multi-label prediction.

The look-up table is turned into a softened adjacency matrix (cosine
similarities, zeroed below tau). A sample's positives are the samples that are
both similar to it (an edge with similarity >= tau) and among its |P+| nearest neighbours
when whole adjacency rows are compared by Euclidean distance.

Pairwise-similarity (PSS) and k-nearest-neighbour (KNN) predictors are kept as
baselines.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from base.exceptions import DatasetFormatError, DimensionMismatchError, InvalidParameterError
from base.utils import validate_range

logger = logging.getLogger(__name__)

PREDICTORS = ('gsmlp', 'pss', 'knn')


@dataclass(frozen=True)
class SoftAdjacency:
    matrix: np.ndarray
    tau: float
    written: np.ndarray = field(default=None)
    unwritten: int = 0
    # kept edges; an edge may carry a similarity of exactly 0 when tau <= 0
    edges: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.written is None:
            object.__setattr__(self, 'written', np.ones(len(self.matrix), dtype=bool))
        if self.edges is None:
            object.__setattr__(self, 'edges', self.matrix != 0.0)

    @property
    def n(self):
        return self.matrix.shape[0]

    def check_index(self, i):
        if not 0 <= int(i) < self.n:
            raise InvalidParameterError(f"Sample index {i} is outside 0..{self.n - 1}")
        return int(i)


def validate_tau(tau):
    return float(validate_range(tau, 'tau', -1.0, 1.0, low_inclusive=False))


def build_adjacency(table, tau):
    """
    A = M M^T with every element below tau replaced by 0 and a unit diagonal.

    Unwritten table rows produce an all-zero row and column (except the
    diagonal); their number is reported on the result and logged.
    """
    tau = validate_tau(tau)
    rows = np.asarray(table.rows, dtype=np.float64)
    written = np.array(table.written, dtype=bool)

    matrix = rows @ rows.T
    matrix = (matrix + matrix.T) / 2.0
    edges = matrix >= tau
    edges[~written, :] = False
    edges[:, ~written] = False
    np.fill_diagonal(edges, True)

    matrix[~edges] = 0.0
    np.fill_diagonal(matrix, 1.0)

    unwritten = int((~written).sum())
    if unwritten:
        logger.warning(f"Adjacency built with {unwritten} unwritten table rows")

    return SoftAdjacency(matrix=matrix, tau=tau, written=written, unwritten=unwritten, edges=edges)


def positive_candidates(adj, i):
    """P+_i: indices j with an edge to i (similarity >= tau), ascending; always contains i"""
    i = adj.check_index(i)
    return np.flatnonzero(adj.edges[i])


def neighbour_ranking(adj, i):
    """
    Q_i: every index ordered by the Euclidean distance between adjacency
    rows a_i and a_j. i itself comes first, unwritten samples last, ties go
    to the lower index.
    """
    i = adj.check_index(i)
    # distances closer than 1e-12 count as ties
    distances = np.round(np.linalg.norm(adj.matrix - adj.matrix[i], axis=1), 12)
    index = np.arange(adj.n)
    # lexsort: last key is the primary one
    return np.lexsort((index, distances, ~adj.written, index != i))


def predict_multilabel(adj, i):
    """Positives are P+_i intersected with the first |P+_i| entries of Q_i"""
    i = adj.check_index(i)
    candidates = positive_candidates(adj, i)
    nearest = neighbour_ranking(adj, i)[:len(candidates)]

    label = np.zeros(adj.n, dtype=bool)
    label[np.intersect1d(candidates, nearest)] = True
    label[i] = True
    return label


def pss_predict(adj, i):
    """Pairwise-similarity score baseline: every kept edge is a positive"""
    i = adj.check_index(i)
    label = adj.edges[i].copy()
    label[i] = True
    return label


def knn_predict(table, i, c):
    """Self plus the c most similar other samples"""
    n = table.n
    if not 0 <= int(i) < n:
        raise InvalidParameterError(f"Sample index {i} is outside 0..{n - 1}")
    if not 1 <= c <= n - 1:
        raise InvalidParameterError(f"knn c={c} must lie in 1..{n - 1}")

    rows = np.asarray(table.rows)
    similarity = rows @ rows[i]
    others = np.delete(np.arange(n), i)
    order = others[np.lexsort((others, -similarity[others]))]

    label = np.zeros(n, dtype=bool)
    label[order[:c]] = True
    label[i] = True
    return label


def single_class_labels(n):
    """Every sample is its own class: only the self bit is set"""
    return np.eye(n, dtype=bool)


def predict_labels(table, predictor='gsmlp', tau=0.6, knn_c=4):
    """
    n x n boolean label matrix for every sample; row i is the multi-label of i.
    """
    if predictor == 'single':
        return single_class_labels(table.n)
    if predictor not in PREDICTORS:
        raise InvalidParameterError(f"Unknown label predictor '{predictor}'", code='unknown_predictor')

    if predictor == 'knn':
        labels = np.vstack([knn_predict(table, i, knn_c) for i in range(table.n)])
    else:
        adj = build_adjacency(table, tau)
        predict = predict_multilabel if predictor == 'gsmlp' else pss_predict
        labels = np.vstack([predict(adj, i) for i in range(adj.n)])

    logger.debug(f"{predictor} labels: {labels.sum(axis=1).mean():.2f} positives per sample")
    return labels


def labels_to_frame(labels):
    labels = np.asarray(labels, dtype=bool)
    return pd.DataFrame({
        'index': np.arange(len(labels)),
        'positives': [';'.join(str(j) for j in np.flatnonzero(row)) for row in labels],
    })


def write_labels_csv(path, labels):
    labels_to_frame(labels).to_csv(path, index=False)


def read_labels_csv(path):
    frame = pd.read_csv(path, dtype={'positives': str}, keep_default_na=False)
    if list(frame.columns) != ['index', 'positives']:
        raise DatasetFormatError(f"Label file {path} must have columns index,positives")

    n = len(frame)
    if not np.array_equal(frame['index'].to_numpy(), np.arange(n)):
        raise DatasetFormatError(f"Label file {path} indices must be contiguous from 0")

    labels = np.zeros((n, n), dtype=bool)
    for i, cell in enumerate(frame['positives']):
        positives = [int(token) for token in str(cell).split(';') if token != '']
        if any(not 0 <= j < n for j in positives):
            raise DimensionMismatchError(f"Label row {i} references an index outside 0..{n - 1}")
        labels[i, positives] = True
    return labels
