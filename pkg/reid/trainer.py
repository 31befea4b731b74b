"""
Training schedule for the linear encoder.

Warm-up epochs train on single-class labels. Afterwards the multi-labels
are re-predicted from the look-up table at the start of an epoch. Each batch
computes its loss against a snapshot of the table taken before the batch,
takes one SGD+momentum step and then folds the batch features into the table.
The table is rebuilt from fresh encoder outputs every `reinit_every` epochs.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from base.exceptions import InvalidParameterError, TrainingAbortedError
from base.utils import validate_range
from .encoder import LinearEncoder
from .evaluation import RetrievalProtocol, cmc_map, label_quality
from .feature_store import LookupTable
from .gsmlp import PREDICTORS, predict_labels, single_class_labels, validate_tau
from .smlc import batch_loss_and_gradient, validate_gamma

logger = logging.getLogger(__name__)

LOSSES = ('smlc', 'ce')


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 128
    lr: float = 0.01
    lr_decay_every: int = 10
    lr_decay_factor: float = 0.1
    momentum: float = 0.9
    warmup_epochs: int = 5
    reinit_every: int = 5
    tau: float = 0.6
    gamma: float = 0.01
    seed: int = 0
    embed_dim: int = 32
    predictor: str = 'gsmlp'
    loss: str = 'smlc'
    knn_c: int = 4
    ce_temperature: float = 0.1
    label_refresh_every: int = 1
    exclude_self: bool = False
    ranks: tuple = (1, 5, 10)

    def __post_init__(self):
        for name in ('epochs', 'batch_size', 'lr_decay_every', 'warmup_epochs', 'reinit_every',
                     'knn_c', 'label_refresh_every'):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be at least 1")
        if self.lr <= 0:
            raise InvalidParameterError(f"lr={self.lr} must be positive")
        validate_range(self.lr_decay_factor, 'lr_decay_factor', 0.0, 1.0, low_inclusive=False)
        validate_range(self.momentum, 'momentum', 0.0, 1.0)
        if self.ce_temperature <= 0:
            raise InvalidParameterError(f"ce_temperature={self.ce_temperature} must be positive")
        if self.predictor not in PREDICTORS:
            raise InvalidParameterError(f"Unknown label predictor '{self.predictor}'")
        if self.loss not in LOSSES:
            raise InvalidParameterError(f"Unknown loss '{self.loss}'")
        validate_tau(self.tau)
        validate_gamma(self.gamma)

    def as_dict(self):
        return asdict(self)


def learning_rate(config, epoch):
    """Step schedule: lr * factor ** (epoch // lr_decay_every), epoch counted from 0"""
    return config.lr * config.lr_decay_factor ** (epoch // config.lr_decay_every)


def run_seeds(config):
    """Independent streams for encoder initialisation and batch shuffling"""
    return np.random.SeedSequence(config.seed).spawn(2)


def initial_encoder(config, raw_dim):
    """The untrained encoder a run with this config starts from"""
    return LinearEncoder.initialize(raw_dim, config.embed_dim, np.random.default_rng(run_seeds(config)[0]))


def check_dataset_fits(config, n_samples):
    """Settings that depend on the dataset size; checked before any training starts"""
    if config.predictor == 'knn' and config.knn_c > n_samples - 1:
        raise InvalidParameterError(
            f"knn_c={config.knn_c} needs at least {config.knn_c + 1} samples, the dataset has {n_samples}"
        )


def uses_single_class_labels(config, epoch):
    return epoch < config.warmup_epochs


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    mean_loss: float
    label_precision: float
    label_recall: float
    positives_per_sample: float
    ranks: dict
    map: float
    lr: float

    def as_row(self):
        row = {
            'epoch': self.epoch,
            'mean_loss': self.mean_loss,
            'label_precision': self.label_precision,
            'label_recall': self.label_recall,
            'positives_per_sample': self.positives_per_sample,
        }
        row.update({f"rank{k}": value for k, value in self.ranks.items()})
        row.update({'map': self.map, 'lr': self.lr})
        return row


@dataclass
class MetricsHistory:
    epochs: list = field(default_factory=list)

    def append(self, metrics):
        self.epochs.append(metrics)

    def __len__(self):
        return len(self.epochs)

    def __getitem__(self, index):
        return self.epochs[index]

    @property
    def final(self):
        return self.epochs[-1] if self.epochs else None

    def to_frame(self):
        return pd.DataFrame([metrics.as_row() for metrics in self.epochs])

    def write_csv(self, path):
        self.to_frame().to_csv(path, index=False)


class Trainer:
    """
    Owns the encoder, its velocity buffer and the look-up table for one run.
    """

    def __init__(self, config, dataset, encoder=None):
        check_dataset_fits(config, len(dataset))
        self.config = config
        self.dataset = dataset
        self.encoder = encoder or initial_encoder(config, dataset.raw_dim)
        self.velocity = np.zeros_like(self.encoder.weights)
        self.table = LookupTable.empty(len(dataset), self.encoder.embed_dim)
        self.protocol = RetrievalProtocol.standard(dataset.identities, dataset.cameras)
        self.labels = single_class_labels(len(dataset))
        self._shuffle = np.random.default_rng(run_seeds(config)[1])
        self.history = MetricsHistory()

    def refresh_labels(self, epoch):
        config = self.config
        if uses_single_class_labels(config, epoch):
            self.labels = single_class_labels(len(self.dataset))
        elif (epoch - config.warmup_epochs) % config.label_refresh_every == 0:
            self.labels = predict_labels(self.table, config.predictor, config.tau, config.knn_c)
        return self.labels

    def train_batch(self, indices, lr, epoch, batch_no):
        config = self.config
        raw = self.dataset.raw[indices]
        features = self.encoder.encode_batch(raw, indices)

        for i, z in zip(indices, features):
            if not self.table.written[i]:
                self.table.write_row(i, z)

        snapshot = self.table.snapshot()
        rows = np.asarray(snapshot.rows)
        eligible = None if snapshot.fully_written else np.asarray(snapshot.written)

        losses, grad_z = batch_loss_and_gradient(
            features, features @ rows.T, rows, self.labels[indices], indices,
            loss=config.loss, gamma=config.gamma, temperature=config.ce_temperature,
            eligible=eligible, exclude_self=config.exclude_self,
        )
        if not np.all(np.isfinite(losses)) or not np.all(np.isfinite(grad_z)):
            raise TrainingAbortedError(
                "Non-finite loss", epoch=epoch, batch=batch_no,
                state={'lr': lr, 'losses': losses, 'weight_norm': float(np.linalg.norm(self.encoder.weights))},
            )

        grad_w = self.encoder.batch_gradient(raw, grad_z, indices) / len(indices)
        self.velocity = config.momentum * self.velocity - lr * grad_w
        self.encoder.weights = self.encoder.weights + self.velocity
        self.encoder.step += 1
        self.table.step += 1

        self.table.update_rows(indices, features)
        return losses

    def evaluate(self, epoch, losses, lr):
        features = self.encoder.encode_batch(self.dataset.raw)
        retrieval = cmc_map(self.dataset.identities, self.dataset.cameras, features, self.protocol)
        quality = label_quality(self.labels, self.dataset.identities)

        return EpochMetrics(
            epoch=epoch + 1,
            mean_loss=float(np.mean(losses)),
            label_precision=quality.precision,
            label_recall=quality.recall,
            positives_per_sample=quality.mean_positives,
            ranks={k: retrieval.rank(k) for k in self.config.ranks},
            map=retrieval.mean_ap,
            lr=lr,
        )

    def run_epoch(self, epoch):
        config = self.config
        lr = learning_rate(config, epoch)
        self.refresh_labels(epoch)

        order = self._shuffle.permutation(len(self.dataset))
        losses = []
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            indices = order[start:start + config.batch_size]
            losses.append(self.train_batch(indices, lr, epoch, batch_no))

        if (epoch + 1) % config.reinit_every == 0:
            self.table.reinitialize(self.encoder.encode_batch(self.dataset.raw))

        metrics = self.evaluate(epoch, np.concatenate(losses), lr)
        self.history.append(metrics)
        logger.info(
            f"epoch {metrics.epoch}/{config.epochs} loss={metrics.mean_loss:.4f} "
            f"precision={metrics.label_precision:.3f} recall={metrics.label_recall:.3f} "
            f"rank1={retrieval_rank(metrics, 1):.3f} mAP={metrics.map:.3f} lr={lr:g}"
        )
        return metrics

    def fit(self):
        for epoch in range(self.config.epochs):
            self.run_epoch(epoch)
        if self.table.degenerate_updates:
            logger.warning(f"{self.table.degenerate_updates} degenerate table updates were skipped")
        return self.encoder, self.history


def retrieval_rank(metrics, k):
    return metrics.ranks.get(k, float('nan'))


def train(config, dataset, encoder=None):
    """Run the full schedule; returns (encoder, MetricsHistory)"""
    return Trainer(config, dataset, encoder).fit()
