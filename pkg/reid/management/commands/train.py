from base.commands import ReidCommand
from reid.trainer import Trainer


class Command(ReidCommand):
    help = 'Train the encoder with label prediction and the selected loss; write metrics and snapshots'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--metrics-file', default='metrics.csv')
        parser.add_argument('--encoder-file', default='encoder.gsew')
        parser.add_argument('--table-file', default='table.gslt')

    def run(self, run_config, dataset, **options):
        config = run_config.train
        self.stdout.write(
            f"Training on {len(dataset)} samples for {config.epochs} epochs "
            f"({config.loss} + {config.predictor}, tau={config.tau}, gamma={config.gamma})"
        )

        trainer = Trainer(config, dataset)
        encoder, history = trainer.fit()

        out = run_config.out
        history.write_csv(out / options['metrics_file'])
        encoder.save(out / options['encoder_file'])
        trainer.table.save(out / options['table_file'])

        final = history.final
        self.success(
            f"Finished: rank1={final.ranks.get(1, float('nan')):.4f} mAP={final.map:.4f}; "
            f"metrics in {out / options['metrics_file']}"
        )
