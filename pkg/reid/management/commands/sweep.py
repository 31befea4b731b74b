import pandas as pd
from rest_framework import serializers

from base.commands import ReidCommand
from base.serializers import TrainConfigSerializer
from reid.trainer import check_dataset_fits, train

SWEEPABLE = {
    'tau': float,
    'gamma': float,
    'predictor': str,
    'loss': str,
}


class Command(ReidCommand):
    help = 'One full training run per parameter value with a shared seed; long-format CSV'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('parameter', choices=sorted(SWEEPABLE))
        parser.add_argument('values', nargs='*')
        parser.add_argument('--sweep-file', default=None,
                            help='Defaults to sweep_<parameter>.csv')

    def validate_options(self, run_config, options):
        parameter, values = options['parameter'], options['values']
        if not values:
            raise serializers.ValidationError({'values': ['A sweep needs at least one value']})

        cast = SWEEPABLE[parameter]
        try:
            options['values'] = [cast(value) for value in values]
        except ValueError:
            raise serializers.ValidationError({'values': [f"Values for {parameter} must be {cast.__name__}"]})

        # every value is validated before the first run starts
        base = TrainConfigSerializer().to_representation(run_config.train)
        for value in options['values']:
            checker = TrainConfigSerializer(data={**base, parameter: value})
            checker.is_valid(raise_exception=True)

    def validate_dataset(self, run_config, dataset, options):
        for value in options['values']:
            check_dataset_fits(run_config.with_train(**{options['parameter']: value}).train, len(dataset))

    def run(self, run_config, dataset, **options):
        parameter, values = options['parameter'], options['values']

        frames = []
        for value in values:
            self.stdout.write(f"Sweep {parameter}={value}")
            _, history = train(run_config.with_train(**{parameter: value}).train, dataset)
            frame = history.to_frame()
            frame.insert(0, 'value', value)
            frame.insert(0, 'parameter', parameter)
            frames.append(frame)

        path = run_config.out / (options['sweep_file'] or f"sweep_{parameter}.csv")
        pd.concat(frames, ignore_index=True).to_csv(path, index=False)
        self.success(f"{len(values)} runs written to {path}")
