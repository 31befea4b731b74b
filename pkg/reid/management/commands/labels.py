import pandas as pd
from rest_framework import serializers

from base.commands import ReidCommand
from reid.encoder import LinearEncoder
from reid.evaluation import label_quality
from reid.feature_store import init_table
from reid.gsmlp import predict_labels, write_labels_csv
from reid.trainer import initial_encoder


class Command(ReidCommand):
    help = 'Predict multi-labels with gsmlp, pss or knn and report their quality'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--encoder', help='Encoder snapshot; a fresh random encoder when omitted')
        parser.add_argument('--raw-features', action='store_true',
                            help='Use the L2-normalised raw vectors instead of an encoder')

    def validate_options(self, run_config, options):
        path = options.get('encoder')
        if path and options.get('raw_features'):
            raise serializers.ValidationError({'encoder': ['--encoder and --raw-features are mutually exclusive']})
        if path:
            options['encoder_snapshot'] = LinearEncoder.load(path)

    def features(self, run_config, dataset, options):
        if options.get('raw_features'):
            return dataset.normalized_raw()
        encoder = options.get('encoder_snapshot') or initial_encoder(run_config.train, dataset.raw_dim)
        return encoder.encode_batch(dataset.raw)

    def run(self, run_config, dataset, **options):
        config = run_config.train
        table = init_table(self.features(run_config, dataset, options))

        labels = predict_labels(table, config.predictor, config.tau, config.knn_c)
        report = label_quality(labels, dataset.identities)

        labels_path = run_config.out / f"labels_{config.predictor}.csv"
        write_labels_csv(labels_path, labels)

        quality_path = run_config.out / f"label_quality_{config.predictor}.csv"
        pd.DataFrame([{
            'predictor': config.predictor,
            'tau': config.tau,
            'knn_c': config.knn_c,
            'precision': report.precision,
            'recall': report.recall,
            'mean_positives': report.mean_positives,
        }]).to_csv(quality_path, index=False)

        self.stdout.write(
            f"precision={report.precision:.4f} recall={report.recall:.4f} "
            f"mean_positives={report.mean_positives:.2f}"
        )
        self.success(f"Labels written to {labels_path}")
