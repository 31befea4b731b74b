from dataclasses import replace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from base.exceptions import DegenerateEmbeddingError, InvalidParameterError, TrainingAbortedError
from reid.encoder import LinearEncoder
from reid.synthetic import generate
from reid.trainer import (
    EpochMetrics, MetricsHistory, TrainConfig, Trainer, check_dataset_fits, initial_encoder, learning_rate,
    train, uses_single_class_labels,
)
from .helpers import TINY_SPEC

TINY_CONFIG = TrainConfig(
    epochs=8, batch_size=16, lr=0.05, warmup_epochs=2, reinit_every=3, embed_dim=8, seed=1,
)


class TrainConfigTests(SimpleTestCase):
    def test_defaults(self):
        config = TrainConfig()
        self.assertEqual((config.epochs, config.batch_size, config.lr, config.momentum), (40, 128, 0.01, 0.9))
        self.assertEqual((config.warmup_epochs, config.reinit_every, config.tau, config.gamma), (5, 5, 0.6, 0.01))
        self.assertEqual((config.predictor, config.loss), ('gsmlp', 'smlc'))

    def test_invalid_values(self):
        for changes in ({'epochs': 0}, {'lr': 0.0}, {'lr_decay_factor': 1.5}, {'momentum': 1.2},
                        {'tau': -1.0}, {'gamma': 1.5}, {'predictor': 'kmeans'}, {'loss': 'triplet'},
                        {'ce_temperature': 0.0}):
            with self.assertRaises(InvalidParameterError):
                TrainConfig(**changes)

    def test_knn_c_checked_against_dataset_size(self):
        small = generate(replace(TINY_SPEC, n_identities=2, images_per_identity=2))
        config = TrainConfig(predictor='knn', knn_c=4, warmup_epochs=1, embed_dim=8)
        with self.assertRaisesMessage(InvalidParameterError, 'the dataset has 4'):
            Trainer(config, small)
        check_dataset_fits(replace(config, knn_c=3), len(small))
        check_dataset_fits(replace(config, predictor='gsmlp'), len(small))


class ScheduleTests(SimpleTestCase):
    def test_step_learning_rate(self):
        config = TrainConfig()
        self.assertAlmostEqual(learning_rate(config, 0), 0.01)
        self.assertAlmostEqual(learning_rate(config, 9), 0.01)
        self.assertAlmostEqual(learning_rate(config, 10), 0.001)
        self.assertAlmostEqual(learning_rate(config, 39), 0.01 * 0.1 ** 3)

    def test_warmup_epochs_use_single_class_labels(self):
        config = TrainConfig()
        self.assertTrue(uses_single_class_labels(config, 3))
        self.assertFalse(uses_single_class_labels(config, 5))

    def test_labels_during_and_after_warmup(self):
        trainer = Trainer(TINY_CONFIG, generate(TINY_SPEC))
        trainer.run_epoch(0)
        np.testing.assert_array_equal(trainer.labels, np.eye(40, dtype=bool))
        trainer.run_epoch(1)
        labels = trainer.refresh_labels(2)
        self.assertTrue(labels.diagonal().all())
        self.assertGreater(labels.sum(), 40)

    def test_label_refresh_cadence(self):
        trainer = Trainer(replace(TINY_CONFIG, label_refresh_every=2), generate(TINY_SPEC))
        for epoch in range(2):
            trainer.run_epoch(epoch)
        with mock.patch('reid.trainer.predict_labels', return_value=np.eye(40, dtype=bool)) as predict:
            trainer.refresh_labels(2)
            trainer.refresh_labels(3)
            trainer.refresh_labels(4)
        self.assertEqual(predict.call_count, 2)


class TrainerStepTests(SimpleTestCase):
    def setUp(self):
        self.dataset = generate(TINY_SPEC)
        self.trainer = Trainer(TINY_CONFIG, self.dataset)

    def test_first_batch_fills_table_rows(self):
        indices = np.arange(16)
        self.trainer.train_batch(indices, 0.05, 0, 0)
        np.testing.assert_array_equal(self.trainer.table.written, np.arange(40) < 16)
        self.assertEqual(self.trainer.table.step, 1)
        self.assertEqual(self.trainer.encoder.step, 1)

    def test_velocity_matches_weights(self):
        self.trainer.train_batch(np.arange(16), 0.05, 0, 0)
        self.assertEqual(self.trainer.velocity.shape, self.trainer.encoder.weights.shape)

    def test_table_rows_stay_unit_norm(self):
        self.trainer.run_epoch(0)
        np.testing.assert_allclose(np.linalg.norm(self.trainer.table.rows, axis=1), 1.0, atol=1e-6)

    def test_reinitialisation_matches_encoder(self):
        for epoch in range(TINY_CONFIG.reinit_every):
            self.trainer.run_epoch(epoch)
        expected = self.trainer.encoder.encode_batch(self.dataset.raw)
        np.testing.assert_allclose(self.trainer.table.rows, expected, atol=1e-12)

    def test_non_finite_loss_aborts(self):
        def broken(features, *args, **kwargs):
            return np.full(len(features), np.nan), np.zeros_like(features)

        with mock.patch('reid.trainer.batch_loss_and_gradient', side_effect=broken):
            with self.assertRaises(TrainingAbortedError) as caught:
                self.trainer.run_epoch(0)
        self.assertEqual((caught.exception.epoch, caught.exception.batch), (0, 0))
        self.assertIn('lr', caught.exception.state)

    def test_degenerate_embedding_names_sample(self):
        raw = self.dataset.raw.copy()
        raw[7] = 0.0
        dataset = replace(self.dataset, raw=raw)
        with self.assertRaises(DegenerateEmbeddingError) as caught:
            Trainer(TINY_CONFIG, dataset).run_epoch(0)
        self.assertEqual(caught.exception.sample_index, 7)


class TrainTests(SimpleTestCase):
    def test_history_shape(self):
        encoder, history = train(replace(TINY_CONFIG, epochs=2), generate(TINY_SPEC))
        self.assertIsInstance(encoder, LinearEncoder)
        self.assertEqual(len(history), 2)
        self.assertEqual([metrics.epoch for metrics in history], [1, 2])
        self.assertEqual(list(history.to_frame().columns), [
            'epoch', 'mean_loss', 'label_precision', 'label_recall', 'positives_per_sample',
            'rank1', 'rank5', 'rank10', 'map', 'lr',
        ])

    def test_same_seed_is_bitwise_identical(self):
        dataset = generate(TINY_SPEC)
        first = train(replace(TINY_CONFIG, epochs=4), dataset)
        second = train(replace(TINY_CONFIG, epochs=4), dataset)
        np.testing.assert_array_equal(first[0].weights, second[0].weights)
        self.assertTrue(first[1].to_frame().equals(second[1].to_frame()))

    def test_seed_changes_initialisation(self):
        self.assertFalse(np.array_equal(
            initial_encoder(TINY_CONFIG, 16).weights,
            initial_encoder(replace(TINY_CONFIG, seed=2), 16).weights,
        ))

    def test_loss_decreases_on_separable_data(self):
        _, history = train(TINY_CONFIG, generate(TINY_SPEC))
        self.assertLess(history.final.mean_loss, history[0].mean_loss)

    def test_ce_objective_runs(self):
        _, history = train(replace(TINY_CONFIG, epochs=3, loss='ce'), generate(TINY_SPEC))
        self.assertTrue(np.isfinite(history.final.mean_loss))

    def test_baseline_predictors_run(self):
        for predictor in ('pss', 'knn'):
            _, history = train(replace(TINY_CONFIG, epochs=3, predictor=predictor), generate(TINY_SPEC))
            self.assertGreaterEqual(history.final.positives_per_sample, 1.0)


class MetricsHistoryTests(SimpleTestCase):
    def test_rows_and_final(self):
        history = MetricsHistory()
        self.assertIsNone(history.final)
        metrics = EpochMetrics(epoch=1, mean_loss=0.5, label_precision=1.0, label_recall=0.0,
                               positives_per_sample=1.0, ranks={1: 0.2, 5: 0.6}, map=0.3, lr=0.01)
        history.append(metrics)
        self.assertIs(history.final, metrics)
        self.assertEqual(list(history.to_frame().columns), [
            'epoch', 'mean_loss', 'label_precision', 'label_recall', 'positives_per_sample',
            'rank1', 'rank5', 'map', 'lr',
        ])
