"""
Selective multi-label classification loss.

Positive similarities are pulled to +1, the hardest gamma-fraction of the
negatives is pushed to -1. Each term is averaged over its own subset. The
mined set is a constant with respect to the gradient.

A softmax cross-entropy over the table similarities is provided as the
baseline objective.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from base.exceptions import DimensionMismatchError, InvalidParameterError
from base.utils import validate_finite, validate_range

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    positive_part: float
    negative_part: float
    hard_negative_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def validate_gamma(gamma):
    return float(validate_range(gamma, 'gamma', 0.0, 1.0, low_inclusive=False))


def hard_negative_count(gamma, n_negatives):
    """ceil(gamma * |P-|), immune to float noise such as 0.07 * 100 = 7.000000000000001"""
    return min(n_negatives, math.ceil(round(gamma * n_negatives, 9)))


def _check_pair(s, label):
    s = validate_finite(s, 's')
    label = np.asarray(label, dtype=bool)
    if s.shape != label.shape or s.ndim != 1:
        raise DimensionMismatchError(f"s has shape {s.shape} but label has shape {label.shape}")
    if not label.any():
        raise InvalidParameterError("A multi-label needs at least one positive")
    return s, label


def hard_negatives(s, label, gamma, eligible=None):
    """
    The ceil(gamma * |P-|) negatives with the largest similarity, sorted by
    descending similarity and then ascending index. Samples outside the
    eligible mask are not negatives.
    """
    gamma = validate_gamma(gamma)
    s, label = _check_pair(s, label)

    negative = ~label if eligible is None else ~label & np.asarray(eligible, dtype=bool)
    candidates = np.flatnonzero(negative)
    if candidates.size == 0:
        return candidates

    order = candidates[np.lexsort((candidates, -s[candidates]))]
    return order[:hard_negative_count(gamma, candidates.size)]


def _positive_indices(label, index=None, exclude_self=False):
    positives = np.flatnonzero(label)
    if exclude_self and index is not None:
        positives = positives[positives != index]
    return positives


def _smlc_coefficients(s, positives, mined):
    """dL/ds for one sample: 2/|P| (s_j - 1) on P plus 2/|N| (s_k + 1) on N"""
    coefficients = np.zeros(len(s))
    if positives.size:
        coefficients[positives] += 2.0 * (s[positives] - 1.0) / positives.size
    if mined.size:
        coefficients[mined] += 2.0 * (s[mined] + 1.0) / mined.size
    return coefficients


def smlc_loss(s, label, gamma, eligible=None, exclude_self=False, index=None):
    """
    mean_{j in P}(s_j - 1)^2 + mean_{k in N}(s_k + 1)^2, N the mined hard negatives.

    With exclude_self the owning index (given as `index`) is dropped from P.
    """
    s, label = _check_pair(s, label)
    mined = hard_negatives(s, label, gamma, eligible)
    positives = _positive_indices(label, index, exclude_self)

    positive_part = float(np.mean((s[positives] - 1.0) ** 2)) if positives.size else 0.0
    negative_part = float(np.mean((s[mined] + 1.0) ** 2)) if mined.size else 0.0

    return LossBreakdown(
        total=positive_part + negative_part,
        positive_part=positive_part,
        negative_part=negative_part,
        hard_negative_indices=mined,
    )


def smlc_gradient(z, table, label, gamma, exclude_self=False, index=None):
    """
    dL/dz = 2/|P| sum_P (s_j - 1) m_j + 2/|N| sum_N (s_k + 1) m_k
    with s = M z and N mined from the same table snapshot.
    """
    z = validate_finite(z, 'z')
    rows = np.asarray(table.rows)
    if z.shape != (rows.shape[1],):
        raise DimensionMismatchError(f"z has shape {z.shape}, expected ({rows.shape[1]},)")

    s = rows @ z
    label = np.asarray(label, dtype=bool)
    mined = hard_negatives(s, label, gamma, getattr(table, 'written', None))
    positives = _positive_indices(label, index, exclude_self)

    return _smlc_coefficients(s, positives, mined) @ rows


def _softmax(logits):
    shifted = logits - np.max(logits)
    weights = np.exp(shifted)
    return weights / weights.sum(), shifted - np.log(weights.sum())


def _check_temperature(temperature):
    if temperature <= 0:
        raise InvalidParameterError(f"temperature={temperature} must be positive")


def _ce_terms(s, label, temperature, eligible=None):
    """
    Loss and dL/ds for one sample. Entries outside the eligible mask (positives
    excepted) are left out of the softmax and get a zero coefficient.
    """
    keep = np.ones(len(s), dtype=bool) if eligible is None else np.asarray(eligible, dtype=bool) | label
    probs, log_probs = _softmax(s[keep] / temperature)

    coefficients = np.zeros(len(s))
    coefficients[keep] = (probs - label[keep] / label[keep].sum()) / temperature
    return float(-np.mean(log_probs[label[keep]])), coefficients


def ce_baseline_loss(s, label, temperature=0.1, eligible=None):
    """
    Mean over positives j of -log softmax(s / T)_j, computed with max-subtraction.
    Entries outside the eligible mask are left out of the softmax.
    """
    _check_temperature(temperature)
    s, label = _check_pair(s, label)
    return _ce_terms(s, label, temperature, eligible)[0]


def ce_baseline_gradient(z, table, label, temperature=0.1):
    """dL_CE/dz = M^T (p - y / |P|) / T over the eligible rows"""
    _check_temperature(temperature)
    z = validate_finite(z, 'z')
    rows = np.asarray(table.rows)
    label = np.asarray(label, dtype=bool)

    _, coefficients = _ce_terms(rows @ z, label, temperature, getattr(table, 'written', None))
    return coefficients @ rows


def batch_loss_and_gradient(features, similarities, rows, labels, indices, loss='smlc', gamma=0.01,
                            temperature=0.1, eligible=None, exclude_self=False):
    """
    Per-sample losses and dL/dz for a whole batch against one table snapshot.

    features: (B, d) batch embeddings; similarities: (B, n) = features @ rows.T;
    labels: (B, n) boolean multi-labels; indices: dataset index of each batch row.
    Terms are produced in batch order so the reduction is deterministic.
    """
    if similarities.shape != labels.shape or len(features) != len(similarities):
        raise DimensionMismatchError("Batch features, similarities and labels disagree in shape")

    coefficients = np.zeros_like(similarities)
    losses = np.zeros(len(features))

    for b, index in enumerate(indices):
        s, label = similarities[b], labels[b]
        if loss == 'ce':
            losses[b], coefficients[b] = _ce_terms(s, label, temperature, eligible)
            continue

        breakdown = smlc_loss(s, label, gamma, eligible, exclude_self, index)
        losses[b] = breakdown.total
        positives = _positive_indices(label, index, exclude_self)
        coefficients[b] = _smlc_coefficients(s, positives, breakdown.hard_negative_indices)

    return losses, coefficients @ rows
