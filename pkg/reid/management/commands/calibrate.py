from pathlib import Path

from base.commands import ReidCommand
from reid.calibration import DEFAULT_MARGIN, PILOT_SEEDS, pilot_run, write_thresholds

FIXTURE = Path(__file__).resolve().parents[2] / 'tests' / 'fixtures' / 'trend_thresholds.yaml'


class Command(ReidCommand):
    help = 'Pilot runs over several seeds; records the end-to-end retrieval thresholds'
    uses_dataset = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--seeds', type=int, nargs='+', default=list(PILOT_SEEDS))
        parser.add_argument('--margin', type=float, default=DEFAULT_MARGIN)
        parser.add_argument('--fixture', action='store_true',
                            help=f"Also update {FIXTURE.relative_to(FIXTURE.parents[3])}")

    def run(self, run_config, dataset, **options):
        runs = []
        for seed in options['seeds']:
            self.stdout.write(f"Pilot run seed={seed}")
            runs.append(pilot_run(run_config.dataset, run_config.train, seed))

        targets = [run_config.out / 'trend_thresholds.yaml']
        if options['fixture']:
            targets.append(FIXTURE)
        for path in targets:
            document = write_thresholds(path, runs, options['margin'])

        for run in runs:
            self.stdout.write(
                f"seed={run.seed} rank1={run.rank1:.4f} mAP={run.map:.4f} random_rank1={run.random_rank1:.4f}"
            )
        thresholds = ' '.join(f"{name}={value:.2f}" for name, value in document['thresholds'].items())
        self.success(f"Thresholds {thresholds} written to {', '.join(str(path) for path in targets)}")
