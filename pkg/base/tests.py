import tempfile
from pathlib import Path

import numpy as np
from django.core.management import CommandError
from django.test import SimpleTestCase, override_settings
from rest_framework.exceptions import ValidationError

from reid.synthetic import DatasetSpec
from reid.trainer import TrainConfig
from .exceptions import (
    RUNTIME_EXIT_CODE, VALIDATION_EXIT_CODE, DatasetFormatError, DegenerateEmbeddingError,
    DimensionMismatchError, InvalidParameterError, NonFiniteValueError, SnapshotFormatError,
    TrainingAbortedError, command_exception_handler, format_validation_detail,
)
from .serializers import RunConfigSerializer, default_sections, resolve_run_config
from .utils import (
    l2_normalize, load_config_file, read_snapshot, validate_finite, validate_range, validate_unit_rows,
    write_snapshot,
)


class ValidationHelperTests(SimpleTestCase):
    def test_finite(self):
        np.testing.assert_array_equal(validate_finite([1, 2]), [1.0, 2.0])
        with self.assertRaises(NonFiniteValueError):
            validate_finite([1.0, np.inf])

    def test_unit_rows(self):
        rows = validate_unit_rows([[0.6, 0.8], [1.0, 0.0]], dim=2)
        self.assertEqual(rows.shape, (2, 2))
        with self.assertRaises(InvalidParameterError):
            validate_unit_rows([1.0, 0.1])
        with self.assertRaises(DimensionMismatchError):
            validate_unit_rows([1.0, 0.0], dim=3)
        with self.assertRaises(DimensionMismatchError):
            validate_unit_rows(np.ones((1, 1, 1)))

    def test_unit_tolerance(self):
        validate_unit_rows([1.0 + 5e-7, 0.0])

    def test_range(self):
        self.assertEqual(validate_range(0.5, 'tau', -1, 1, low_inclusive=False), 0.5)
        self.assertEqual(validate_range(1.0, 'momentum', 0.0, 1.0), 1.0)
        with self.assertRaisesMessage(InvalidParameterError, 'tau=-1 must lie in (-1, 1]'):
            validate_range(-1, 'tau', -1, 1, low_inclusive=False)
        with self.assertRaisesMessage(InvalidParameterError, 'lr=0.0 must lie in (0, inf)'):
            validate_range(0.0, 'lr', 0.0, low_inclusive=False)

    def test_l2_normalize(self):
        np.testing.assert_allclose(l2_normalize([[3.0, 4.0], [0.0, 0.0]]), [[0.6, 0.8], [0.0, 0.0]])


class SnapshotTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'matrix.bin'

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_and_read(self):
        matrix = np.arange(6, dtype=float).reshape(2, 3)
        write_snapshot(self.path, b'TEST', matrix, 99)
        loaded, step = read_snapshot(self.path, b'TEST')
        np.testing.assert_array_equal(loaded, matrix)
        self.assertEqual(step, 99)

    def test_errors(self):
        with self.assertRaises(SnapshotFormatError):
            read_snapshot(self.path, b'TEST')
        self.path.write_bytes(b'TE')
        with self.assertRaises(SnapshotFormatError):
            read_snapshot(self.path, b'TEST')
        write_snapshot(self.path, b'TEST', np.eye(2), 0)
        with self.assertRaises(SnapshotFormatError):
            read_snapshot(self.path, b'GSLT')


class ConfigFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'run.yaml'

    def tearDown(self):
        self.tmp.cleanup()

    def test_sectioned_and_flat_keys(self):
        self.path.write_text('dataset:\n  noise: 0.2\ntrain:\n  tau: 0.5\ngamma: 0.02\n')
        sections = load_config_file(self.path)
        self.assertEqual(sections['dataset'], {'noise': 0.2})
        self.assertEqual(sections['train'], {'tau': 0.5})
        self.assertEqual(sections['extra'], {'gamma': 0.02})

    def test_missing_file(self):
        with self.assertRaises(InvalidParameterError):
            load_config_file(self.path)

    def test_not_a_mapping(self):
        self.path.write_text('- 1\n- 2\n')
        with self.assertRaises(InvalidParameterError):
            load_config_file(self.path)


class ResolveRunConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config = Path(self.tmp.name) / 'run.yaml'

    def tearDown(self):
        self.tmp.cleanup()

    def test_defaults(self):
        run = resolve_run_config({})
        self.assertEqual(run.dataset, DatasetSpec())
        self.assertEqual(run.train, TrainConfig())
        self.assertEqual(run.ranks, (1, 5, 10))

    def test_flags_override_file_override_defaults(self):
        self.config.write_text('train:\n  tau: 0.5\n  gamma: 0.05\nepochs: 3\n')
        run = resolve_run_config({'config': str(self.config), 'gamma': 0.2, 'tau': None})
        self.assertEqual(run.train.tau, 0.5)
        self.assertEqual(run.train.gamma, 0.2)
        self.assertEqual(run.train.epochs, 3)
        self.assertEqual(run.train.batch_size, 128)

    def test_flag_names_map_to_fields(self):
        run = resolve_run_config({'ids': 4, 'per_id': 2, 'batch': 8, 'warmup': 1, 'mixing': False, 'seed': 9})
        self.assertEqual((run.dataset.n_identities, run.dataset.images_per_identity), (4, 2))
        self.assertFalse(run.dataset.mixing)
        self.assertEqual((run.train.batch_size, run.train.warmup_epochs), (8, 1))
        self.assertEqual((run.seed, run.dataset.seed, run.train.seed), (9, 9, 9))

    def test_embed_dim_is_shared(self):
        run = resolve_run_config({'embed_dim': 8, 'raw_dim': 16})
        self.assertEqual(run.train.embed_dim, 8)

    def test_unknown_file_key(self):
        self.config.write_text('train:\n  warmup: 2\n')
        with self.assertRaises(ValidationError):
            resolve_run_config({'config': str(self.config)})

    def test_invalid_values(self):
        for options in ({'gamma': 0.0}, {'tau': -1.0}, {'lr': -0.1}, {'predictor': 'kmeans'},
                        {'ranks': []}, {'lr_decay_factor': 2.0}):
            with self.assertRaises(ValidationError):
                resolve_run_config(options)

    def test_knn_needs_enough_samples(self):
        with self.assertRaises(ValidationError) as caught:
            resolve_run_config({'predictor': 'knn', 'knn_c': 8, 'ids': 2, 'per_id': 4})
        self.assertIn('knn_c', format_validation_detail(caught.exception.detail))

    @override_settings(OUTPUT_DIR=Path('/tmp/reid-elsewhere'))
    def test_output_dir_default(self):
        self.assertEqual(resolve_run_config({}).out, Path('/tmp/reid-elsewhere'))

    def test_serializer_errors_are_nested(self):
        sections = default_sections()
        sections['dataset']['n_identities'] = 0
        serializer = RunConfigSerializer(data=sections)
        self.assertFalse(serializer.is_valid())
        self.assertIn('n_identities', serializer.errors['dataset'])


class ExceptionHandlerTests(SimpleTestCase):
    def test_validation_errors_exit_with_one(self):
        for exc in (ValidationError({'gamma': ['bad']}), InvalidParameterError('bad'),
                    DatasetFormatError('bad'), SnapshotFormatError('bad')):
            error = command_exception_handler(exc, {'command': 'train'})
            self.assertIsInstance(error, CommandError)
            self.assertEqual(error.returncode, VALIDATION_EXIT_CODE)

    def test_runtime_errors_exit_with_two(self):
        for exc in (TrainingAbortedError('Non-finite loss', epoch=3, batch=1),
                    DegenerateEmbeddingError(5, 0.0), OSError('disk full')):
            with self.assertLogs('base.exceptions', level='ERROR'):
                error = command_exception_handler(exc, {'command': 'train'})
            self.assertEqual(error.returncode, RUNTIME_EXIT_CODE)
            self.assertIn('train failed', str(error))

    def test_command_error_passes_through(self):
        original = CommandError('already handled', returncode=3)
        self.assertIs(command_exception_handler(original, {}), original)

    def test_error_codes(self):
        self.assertEqual(InvalidParameterError('x').code, 'invalid_parameter')
        self.assertEqual(DegenerateEmbeddingError(4, 1e-13).sample_index, 4)
        aborted = TrainingAbortedError('stop', epoch=1, batch=2, state={'lr': 0.1})
        self.assertEqual((aborted.epoch, aborted.batch, aborted.state), (1, 2, {'lr': 0.1}))


class FormatValidationDetailTests(SimpleTestCase):
    def test_nested(self):
        detail = {'train': {'gamma': ['must lie in (0, 1]'], 'tau': ['too big']}, 'seed': ['negative']}
        self.assertEqual(
            format_validation_detail(detail),
            'train.gamma: must lie in (0, 1]; train.tau: too big; seed: negative',
        )

    def test_non_field_errors(self):
        self.assertEqual(format_validation_detail({'non_field_errors': ['knn_c too large']}), 'knn_c too large')
        self.assertEqual(format_validation_detail(['a', 'b']), 'a, b')
