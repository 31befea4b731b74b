"""
Shared plumbing for the reid management commands: common flags, config
resolution and exception-to-exit-code translation.
"""
import logging

from django.core.management.base import BaseCommand

from reid.synthetic import generate, load_dataset
from reid.trainer import check_dataset_fits
from .exceptions import command_exception_handler
from .serializers import resolve_run_config
from .utils import ensure_output_dir

logger = logging.getLogger(__name__)


class ReidCommand(BaseCommand):
    """
    Base class: subclasses implement run(run_config, dataset, **options).

    Validation, including the checks that need the loaded dataset, always
    finishes before the output directory is touched.
    """
    uses_dataset = True

    def add_arguments(self, parser):
        parser.add_argument('--config', help='YAML run config file')
        parser.add_argument('--seed', type=int, help='Seed for data generation and training')
        parser.add_argument('--out', help='Output directory')

        dataset = parser.add_argument_group('dataset')
        dataset.add_argument('--dataset', help='Dataset CSV to use instead of generating one')
        dataset.add_argument('--ids', type=int, help='Number of identities')
        dataset.add_argument('--per-id', type=int, help='Images per identity')
        dataset.add_argument('--cameras', type=int, help='Number of cameras')
        dataset.add_argument('--raw-dim', type=int, help='Raw input dimension p')
        dataset.add_argument('--embed-dim', type=int, help='Embedding dimension d')
        dataset.add_argument('--camera-shift', type=float, help='Per-camera offset scale')
        dataset.add_argument('--noise', type=float, help='Per-sample noise scale')
        dataset.add_argument('--no-mixing', dest='mixing', action='store_const', const=False,
                             help='Skip the fixed random mixing matrix')

        train = parser.add_argument_group('training')
        train.add_argument('--epochs', type=int)
        train.add_argument('--batch', type=int, help='Batch size')
        train.add_argument('--lr', type=float, help='Initial learning rate')
        train.add_argument('--lr-decay-every', type=int)
        train.add_argument('--lr-decay-factor', type=float)
        train.add_argument('--momentum', type=float)
        train.add_argument('--warmup', type=int, help='Epochs trained on single-class labels')
        train.add_argument('--reinit-every', type=int, help='Epochs between look-up table rebuilds')
        train.add_argument('--tau', type=float, help='Adjacency threshold')
        train.add_argument('--gamma', type=float, help='Fraction of negatives mined as hard')
        train.add_argument('--predictor', help='Label predictor: gsmlp, pss or knn')
        train.add_argument('--loss', help='Objective: smlc or ce')
        train.add_argument('--knn-c', type=int, help='Neighbours per sample for the knn predictor')
        train.add_argument('--ce-temperature', type=float, help='Softmax temperature of the ce loss')
        train.add_argument('--label-refresh-every', type=int, help='Epochs between label refreshes')
        train.add_argument('--exclude-self', action='store_const', const=True,
                           help='Leave the self term out of the positive part')
        train.add_argument('--ranks', type=int, nargs='+', help='CMC ranks to report')

    def handle(self, *args, **options):
        try:
            run_config = resolve_run_config(options)
            self.validate_options(run_config, options)
            dataset = None
            if self.uses_dataset:
                dataset = self.load_or_generate_dataset(run_config, options)
                self.validate_dataset(run_config, dataset, options)
            ensure_output_dir(run_config.out)
            # the --dataset path is already consumed; it would clash with run()'s dataset argument
            run_options = {key: value for key, value in options.items() if key != 'dataset'}
            return self.run(run_config, dataset, **run_options)
        except Exception as exc:
            raise command_exception_handler(exc, {'command': self.command_name}) from exc

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def validate_options(self, run_config, options):
        """Command-specific checks that must pass before any output is written"""

    def validate_dataset(self, run_config, dataset, options):
        check_dataset_fits(run_config.train, len(dataset))

    def run(self, run_config, dataset, **options):
        raise NotImplementedError

    def load_or_generate_dataset(self, run_config, options):
        if options.get('dataset'):
            dataset = load_dataset(options['dataset'])
            self.stdout.write(f"Loaded {len(dataset)} samples from {options['dataset']}")
            return dataset
        return generate(run_config.dataset)

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
