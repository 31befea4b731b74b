"""
Retrieval metrics (CMC, mAP) under the cross-camera protocol and
multi-label quality against generator ground truth.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from base.exceptions import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalProtocol:
    """
    Query and gallery indices into one dataset. Gallery entries sharing both
    identity and camera with a query are removed from that query's ranking.
    """
    queries: np.ndarray
    gallery: np.ndarray

    @classmethod
    def standard(cls, identities, cameras):
        """The first sample of every (identity, camera) pair is a query; everything is gallery"""
        identities = np.asarray(identities)
        cameras = np.asarray(cameras)
        pairs = np.stack([identities, cameras], axis=1)
        _, first = np.unique(pairs, axis=0, return_index=True)
        return cls(queries=np.sort(first), gallery=np.arange(len(identities)))


@dataclass(frozen=True)
class RetrievalReport:
    cmc: np.ndarray
    mean_ap: float
    evaluated: int
    skipped: int = 0

    def rank(self, k):
        """CMC@k (1-based); ranks past the curve end keep its last value"""
        if k < 1:
            raise InvalidParameterError(f"rank k={k} must be at least 1")
        if self.cmc.size == 0:
            return 0.0
        return float(self.cmc[min(k, self.cmc.size) - 1])


@dataclass(frozen=True)
class LabelQualityReport:
    precision: float
    recall: float
    mean_positives: float
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    per_sample_positives: np.ndarray = field(default=None, repr=False)


def rank_gallery(query_feature, gallery_features):
    """Gallery positions by descending cosine similarity, ties by ascending position"""
    gallery_features = np.atleast_2d(np.asarray(gallery_features, dtype=np.float64))
    if gallery_features.size == 0 or len(gallery_features) == 0:
        raise InvalidParameterError("Cannot rank an empty gallery")
    query_feature = np.asarray(query_feature, dtype=np.float64)
    if query_feature.shape != (gallery_features.shape[1],):
        raise DimensionMismatchError(
            f"Query has shape {query_feature.shape}, gallery rows have {gallery_features.shape[1]}"
        )

    similarity = gallery_features @ query_feature
    position = np.arange(len(gallery_features))
    return np.lexsort((position, -similarity))


def average_precision(matches):
    """AP of a binary relevance vector given in ranked order"""
    matches = np.asarray(matches, dtype=bool)
    hits = np.flatnonzero(matches)
    if hits.size == 0:
        return 0.0
    precision_at_hits = np.arange(1, hits.size + 1) / (hits + 1.0)
    return float(precision_at_hits.mean())


def cmc_map(identities, cameras, features, protocol):
    """
    CMC curve and mAP over the exclusion-filtered rankings.

    Queries left without any same-identity gallery entry are skipped and
    counted on the report.
    """
    identities = np.asarray(identities)
    cameras = np.asarray(cameras)
    features = np.asarray(features, dtype=np.float64)
    if len(features) != len(identities) or len(cameras) != len(identities):
        raise DimensionMismatchError("features, identities and cameras must align")

    gallery = np.asarray(protocol.gallery)
    gallery_features = features[gallery]
    curves, aps, skipped = [], [], 0

    for query in protocol.queries:
        order = gallery[rank_gallery(features[query], gallery_features)]
        same_identity = identities[order] == identities[query]
        keep = ~(same_identity & (cameras[order] == cameras[query]))
        matches = same_identity[keep]

        if not matches.any():
            skipped += 1
            continue

        curve = np.zeros(len(gallery))
        curve[int(np.argmax(matches)):] = 1.0
        curves.append(curve)
        aps.append(average_precision(matches))

    if skipped:
        logger.warning(f"{skipped} queries have no cross-camera match and were skipped")
    if not curves:
        return RetrievalReport(cmc=np.zeros(0), mean_ap=0.0, evaluated=0, skipped=skipped)

    return RetrievalReport(
        cmc=np.mean(curves, axis=0),
        mean_ap=float(np.mean(aps)),
        evaluated=len(curves),
        skipped=skipped,
    )


def evaluate_features(dataset, features, protocol=None):
    """cmc_map over a synthetic dataset with its standard protocol"""
    protocol = protocol or RetrievalProtocol.standard(dataset.identities, dataset.cameras)
    return cmc_map(dataset.identities, dataset.cameras, features, protocol)


def label_quality(predicted, identities):
    """
    Pairwise precision and recall of predicted multi-labels, self excluded
    from both sets. Precision is 1 when nothing but self is predicted and
    recall is 1 when no sample has another same-identity sample.
    """
    predicted = np.asarray(predicted, dtype=bool)
    identities = np.asarray(identities)
    n = len(identities)
    if predicted.shape != (n, n):
        raise DimensionMismatchError(f"Expected an {n} x {n} label matrix, got {predicted.shape}")

    truth = identities[:, None] == identities[None, :]
    others = ~np.eye(n, dtype=bool)

    tp = int(np.sum(predicted & truth & others))
    fp = int(np.sum(predicted & ~truth & others))
    fn = int(np.sum(~predicted & truth & others))

    positives = predicted.sum(axis=1)
    return LabelQualityReport(
        precision=tp / (tp + fp) if tp + fp else 1.0,
        recall=tp / (tp + fn) if tp + fn else 1.0,
        mean_positives=float(positives.mean()),
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        per_sample_positives=positives,
    )
