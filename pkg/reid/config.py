from dataclasses import dataclass, replace
from pathlib import Path

from .synthetic import DatasetSpec
from .trainer import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs: dataset spec, training config, ranks and output directory"""
    dataset: DatasetSpec
    train: TrainConfig
    ranks: tuple
    out: Path
    seed: int = 0

    def with_train(self, **changes):
        return replace(self, train=replace(self.train, **changes))


# command-line flag destination -> (section, field)
FLAG_FIELDS = {
    'ids': ('dataset', 'n_identities'),
    'per_id': ('dataset', 'images_per_identity'),
    'cameras': ('dataset', 'n_cameras'),
    'raw_dim': ('dataset', 'raw_dim'),
    'embed_dim': ('dataset', 'embed_dim'),
    'camera_shift': ('dataset', 'camera_shift'),
    'noise': ('dataset', 'noise'),
    'mixing': ('dataset', 'mixing'),
    'epochs': ('train', 'epochs'),
    'batch': ('train', 'batch_size'),
    'lr': ('train', 'lr'),
    'lr_decay_every': ('train', 'lr_decay_every'),
    'lr_decay_factor': ('train', 'lr_decay_factor'),
    'momentum': ('train', 'momentum'),
    'warmup': ('train', 'warmup_epochs'),
    'reinit_every': ('train', 'reinit_every'),
    'tau': ('train', 'tau'),
    'gamma': ('train', 'gamma'),
    'predictor': ('train', 'predictor'),
    'loss': ('train', 'loss'),
    'knn_c': ('train', 'knn_c'),
    'ce_temperature': ('train', 'ce_temperature'),
    'label_refresh_every': ('train', 'label_refresh_every'),
    'exclude_self': ('train', 'exclude_self'),
    'ranks': ('evaluation', 'ranks'),
}
