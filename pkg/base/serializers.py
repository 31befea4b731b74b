import copy
import logging
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from reid.config import FLAG_FIELDS, RunConfig
from reid.gsmlp import PREDICTORS
from reid.synthetic import DatasetSpec
from reid.trainer import LOSSES, TrainConfig
from .utils import load_config_file

logger = logging.getLogger(__name__)


class DatasetSpecSerializer(serializers.Serializer):
    n_identities = serializers.IntegerField(min_value=1)
    images_per_identity = serializers.IntegerField(min_value=1)
    n_cameras = serializers.IntegerField(min_value=1)
    raw_dim = serializers.IntegerField(min_value=1)
    embed_dim = serializers.IntegerField(min_value=2)
    camera_shift = serializers.FloatField(min_value=0.0)
    noise = serializers.FloatField(min_value=0.0)
    mixing = serializers.BooleanField()

    def validate(self, data):
        if data['raw_dim'] < data['embed_dim']:
            raise serializers.ValidationError('raw_dim must not be smaller than embed_dim')
        return data


class TrainConfigSerializer(serializers.Serializer):
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    lr = serializers.FloatField()
    lr_decay_every = serializers.IntegerField(min_value=1)
    lr_decay_factor = serializers.FloatField()
    momentum = serializers.FloatField(min_value=0.0, max_value=1.0)
    warmup_epochs = serializers.IntegerField(min_value=1)
    reinit_every = serializers.IntegerField(min_value=1)
    tau = serializers.FloatField()
    gamma = serializers.FloatField()
    predictor = serializers.ChoiceField(choices=PREDICTORS)
    loss = serializers.ChoiceField(choices=LOSSES)
    knn_c = serializers.IntegerField(min_value=1)
    ce_temperature = serializers.FloatField()
    label_refresh_every = serializers.IntegerField(min_value=1)
    exclude_self = serializers.BooleanField()

    def validate_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError("Learning rate must be positive")
        return value

    def validate_lr_decay_factor(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("Decay factor must lie in (0, 1]")
        return value

    def validate_tau(self, value):
        if not -1 < value <= 1:
            raise serializers.ValidationError("tau must lie in (-1, 1]")
        return value

    def validate_gamma(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("gamma must lie in (0, 1]")
        return value

    def validate_ce_temperature(self, value):
        if value <= 0:
            raise serializers.ValidationError("Temperature must be positive")
        return value


class EvaluationSerializer(serializers.Serializer):
    ranks = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=False)


class RunConfigSerializer(serializers.Serializer):
    dataset = DatasetSpecSerializer()
    train = TrainConfigSerializer()
    evaluation = EvaluationSerializer()
    seed = serializers.IntegerField(min_value=0)
    out = serializers.CharField()

    def validate(self, data):
        n_samples = data['dataset']['n_identities'] * data['dataset']['images_per_identity']
        if data['train']['predictor'] == 'knn' and data['train']['knn_c'] > n_samples - 1:
            raise serializers.ValidationError(
                f"knn_c={data['train']['knn_c']} needs at least {data['train']['knn_c'] + 1} samples"
            )
        return data

    def create(self, validated_data):
        seed = validated_data['seed']
        ranks = tuple(sorted(set(validated_data['evaluation']['ranks'])))
        dataset = DatasetSpec(seed=seed, **validated_data['dataset'])
        train = TrainConfig(
            seed=seed, embed_dim=dataset.embed_dim, ranks=ranks, **validated_data['train']
        )
        return RunConfig(dataset=dataset, train=train, ranks=ranks, out=Path(validated_data['out']), seed=seed)


def default_sections():
    defaults = settings.REID
    return {
        'dataset': copy.deepcopy(defaults['DATASET']),
        'train': copy.deepcopy(defaults['TRAIN']),
        'evaluation': copy.deepcopy(defaults['EVALUATION']),
        'seed': defaults['SEED'],
        'out': str(settings.OUTPUT_DIR),
    }


SECTION_FIELDS = {
    section: {name for owner, name in FLAG_FIELDS.values() if owner == section}
    for section in ('dataset', 'train', 'evaluation')
}


def _apply(sections, key, value, source):
    if key in ('seed', 'out'):
        sections[key] = value
        return
    if key in FLAG_FIELDS:
        section, name = FLAG_FIELDS[key]
        sections[section][name] = value
        return
    for section, names in SECTION_FIELDS.items():
        if key in names:
            sections[section][key] = value
            return
    raise serializers.ValidationError({key: [f"Unknown setting in {source}"]})


def resolve_run_config(options):
    """
    Merge built-in defaults, an optional YAML config file and command-line
    flags (in increasing precedence) and validate the result.
    """
    sections = default_sections()

    if options.get('config'):
        from_file = load_config_file(options['config'])
        for section in ('dataset', 'train', 'evaluation'):
            for key, value in from_file.get(section, {}).items():
                if key not in sections[section]:
                    raise serializers.ValidationError({f"{section}.{key}": ["Unknown setting in config file"]})
                sections[section][key] = value
        for key, value in from_file.get('extra', {}).items():
            _apply(sections, key, value, 'config file')

    for key, value in options.items():
        if value is None or (key not in FLAG_FIELDS and key not in ('seed', 'out')):
            continue
        _apply(sections, key, value, 'command line')

    serializer = RunConfigSerializer(data=sections)
    serializer.is_valid(raise_exception=True)
    run = serializer.save()
    logger.debug(f"Resolved run config: {run}")
    return run
