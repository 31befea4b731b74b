import pandas as pd

from base.commands import ReidCommand
from reid.encoder import LinearEncoder
from reid.evaluation import evaluate_features, label_quality
from reid.feature_store import init_table
from reid.gsmlp import predict_labels
from reid.trainer import EpochMetrics, initial_encoder


class Command(ReidCommand):
    help = 'Score an encoder snapshot (or a fresh random encoder) with CMC and mAP'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--encoder', help='Encoder snapshot; a fresh random encoder when omitted')
        parser.add_argument('--report-file', default='evaluation.csv')

    def validate_options(self, run_config, options):
        if options.get('encoder'):
            options['encoder_snapshot'] = LinearEncoder.load(options['encoder'])

    def run(self, run_config, dataset, **options):
        config = run_config.train
        encoder = options.get('encoder_snapshot') or initial_encoder(config, dataset.raw_dim)

        features = encoder.encode_batch(dataset.raw)
        retrieval = evaluate_features(dataset, features)
        labels = predict_labels(init_table(features), config.predictor, config.tau, config.knn_c)
        quality = label_quality(labels, dataset.identities)

        row = EpochMetrics(
            epoch=0,
            mean_loss=float('nan'),
            label_precision=quality.precision,
            label_recall=quality.recall,
            positives_per_sample=quality.mean_positives,
            ranks={k: retrieval.rank(k) for k in run_config.ranks},
            map=retrieval.mean_ap,
            lr=float('nan'),
        ).as_row()

        path = run_config.out / options['report_file']
        pd.DataFrame([row]).to_csv(path, index=False)

        ranks = ' '.join(f"rank{k}={retrieval.rank(k):.4f}" for k in run_config.ranks)
        self.stdout.write(f"{ranks} mAP={retrieval.mean_ap:.4f} skipped={retrieval.skipped}")
        self.success(f"Evaluation written to {path}")
