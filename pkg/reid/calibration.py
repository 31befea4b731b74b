"""
Pilot runs that fix the end-to-end retrieval thresholds.

Each pilot trains the given config on the given synthetic dataset under one seed and
compares the final retrieval with the untrained encoder of the same run. The
thresholds are the worst pilot result minus a margin, floored to two decimals.
"""
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import yaml

from base.exceptions import InvalidParameterError
from .evaluation import evaluate_features
from .synthetic import generate
from .trainer import initial_encoder, retrieval_rank, train

logger = logging.getLogger(__name__)

# minimum end-to-end retrieval on the default synthetic dataset
TARGETS = {'rank1': 0.90, 'map': 0.60, 'rank1_gain': 0.20}
DEFAULT_MARGIN = 0.02
PILOT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class PilotRun:
    seed: int
    rank1: float
    map: float
    random_rank1: float

    @property
    def rank1_gain(self):
        return self.rank1 - self.random_rank1


def pilot_run(spec, config, seed):
    dataset = generate(replace(spec, seed=seed))
    config = replace(config, seed=seed)

    untrained = initial_encoder(config, dataset.raw_dim)
    random_rank1 = evaluate_features(dataset, untrained.encode_batch(dataset.raw)).rank(1)
    _, history = train(config, dataset)

    run = PilotRun(seed=seed, rank1=retrieval_rank(history.final, 1), map=history.final.map,
                   random_rank1=random_rank1)
    logger.info(f"pilot seed={seed} rank1={run.rank1:.4f} mAP={run.map:.4f} random rank1={random_rank1:.4f}")
    return run


def thresholds_from_pilots(runs, margin=DEFAULT_MARGIN):
    if not runs:
        raise InvalidParameterError("Thresholds need at least one pilot run")

    def floor(value):
        return math.floor(round((value - margin) * 100, 6)) / 100

    thresholds = {
        'rank1': floor(min(run.rank1 for run in runs)),
        'map': floor(min(run.map for run in runs)),
        'rank1_gain': floor(min(run.rank1_gain for run in runs)),
    }
    short = [name for name, value in thresholds.items() if value < TARGETS[name]]
    if short:
        logger.warning(f"Pilot thresholds below target for {', '.join(short)}: {thresholds}")
    return thresholds


def write_thresholds(path, runs, margin=DEFAULT_MARGIN):
    document = {
        'margin': margin,
        'thresholds': thresholds_from_pilots(runs, margin),
        'pilot_runs': [asdict(run) for run in runs],
    }
    with open(path, 'w', encoding='utf-8') as handle:
        yaml.safe_dump(document, handle, sort_keys=False)
    return document


def load_thresholds(path):
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"Threshold file {path} does not exist")
    with open(path, 'r', encoding='utf-8') as handle:
        document = yaml.safe_load(handle) or {}

    thresholds = document.get('thresholds') or {}
    missing = sorted(set(TARGETS) - set(thresholds))
    if missing:
        raise InvalidParameterError(f"Threshold file {path} lacks {', '.join(missing)}")
    runs = [PilotRun(**run) for run in document.get('pilot_runs') or []]
    return thresholds, runs
