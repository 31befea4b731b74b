from base.commands import ReidCommand
from reid.synthetic import generate, save_dataset


class Command(ReidCommand):
    help = 'Generate a synthetic identity/camera dataset and write it as CSV'
    uses_dataset = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--filename',
            default='dataset.csv',
            help='Name of the CSV written inside the output directory',
        )

    def run(self, run_config, dataset, **options):
        self.stdout.write('Generating synthetic dataset...')
        dataset = generate(run_config.dataset)

        path = run_config.out / options['filename']
        save_dataset(path, dataset)

        self.stdout.write(
            f"samples={len(dataset)} identities={dataset.n_identities} cameras={dataset.n_cameras}"
        )
        self.success(f"Dataset written to {path}")
