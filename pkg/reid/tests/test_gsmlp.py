import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from base.exceptions import DatasetFormatError, InvalidParameterError
from reid.feature_store import LookupTable, init_table
from reid.gsmlp import (
    build_adjacency, knn_predict, neighbour_ranking, positive_candidates, predict_labels,
    predict_multilabel, pss_predict, read_labels_csv, single_class_labels, write_labels_csv,
)
from .helpers import A, B, C, D, four_node_table, random_unit

EPS = 1e-9


class BuildAdjacencyTests(SimpleTestCase):
    def test_four_node_example(self):
        adj = build_adjacency(four_node_table(), 0.9)
        expected = [[1, .9848, 0, 0], [.9848, 1, 0, 0], [0, 0, 1, .9848], [0, 0, .9848, 1]]
        np.testing.assert_allclose(adj.matrix, expected, atol=1e-4)

    def test_lowest_threshold_keeps_everything(self):
        rng = np.random.default_rng(1)
        features = random_unit(rng, 7, 3)
        adj = build_adjacency(init_table(features), -1 + EPS)
        gram = features @ features.T
        np.fill_diagonal(gram, 1.0)
        np.testing.assert_allclose(adj.matrix, gram, atol=1e-12)

    def test_single_node(self):
        adj = build_adjacency(init_table([[0.0, 1.0]]), 0.6)
        np.testing.assert_array_equal(adj.matrix, [[1.0]])

    def test_tau_out_of_range(self):
        for tau in (-1.0, 1.5):
            with self.assertRaises(InvalidParameterError):
                build_adjacency(four_node_table(), tau)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n, d = rng.integers(1, 13), rng.integers(2, 5)
            tau = rng.uniform(-0.9, 1.0)
            features = random_unit(rng, n, d)
            expected = np.zeros((n, n))
            expected_edges = np.zeros((n, n), dtype=bool)
            for i in range(n):
                for j in range(n):
                    cosine = sum(features[i, k] * features[j, k] for k in range(d))
                    expected[i, j] = 1.0 if i == j else (cosine if cosine >= tau else 0.0)
                    expected_edges[i, j] = i == j or cosine >= tau
            adj = build_adjacency(init_table(features), tau)
            np.testing.assert_allclose(adj.matrix, expected, atol=1e-12)
            np.testing.assert_array_equal(adj.edges, expected_edges)

    def test_structure_invariants(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = rng.integers(2, 10)
            tau = rng.uniform(-0.5, 0.9)
            adj = build_adjacency(init_table(random_unit(rng, n, 3)), tau)
            np.testing.assert_allclose(adj.matrix, adj.matrix.T, atol=1e-9)
            np.testing.assert_allclose(np.diag(adj.matrix), 1.0, atol=1e-9)
            off = adj.matrix[~np.eye(n, dtype=bool)]
            self.assertTrue(np.all((off == 0) | ((off >= tau) & (off <= 1 + 1e-9))))

    def test_unwritten_rows_are_isolated(self):
        table = LookupTable.empty(3, 2)
        table.write_row(0, [1.0, 0.0])
        table.write_row(2, [1.0, 0.0])
        with self.assertLogs('reid.gsmlp', level='WARNING'):
            adj = build_adjacency(table, 0.5)
        self.assertEqual(adj.unwritten, 1)
        np.testing.assert_array_equal(adj.matrix[1], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(adj.matrix[:, 1], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(adj.edges[1], [False, True, False])


class CandidateAndRankingTests(SimpleTestCase):
    def setUp(self):
        self.adj = build_adjacency(four_node_table(), 0.9)

    def test_positive_candidates(self):
        np.testing.assert_array_equal(positive_candidates(self.adj, A), [A, B])

    def test_high_threshold_leaves_self(self):
        adj = build_adjacency(four_node_table(), 0.999)
        np.testing.assert_array_equal(positive_candidates(adj, A), [A])

    def test_dense_graph(self):
        adj = build_adjacency(four_node_table(), -1 + EPS)
        for i in (A, C):
            np.testing.assert_array_equal(positive_candidates(adj, i), [A, B, C, D])

    def test_zero_similarity_edge_is_kept(self):
        adj = build_adjacency(init_table([[1.0, 0.0], [0.0, 1.0]]), 0.0)
        self.assertEqual(adj.matrix[0, 1], 0.0)
        self.assertTrue(adj.edges[0, 1])
        np.testing.assert_array_equal(positive_candidates(adj, 0), [0, 1])

    def test_zero_similarity_below_positive_tau(self):
        adj = build_adjacency(init_table([[1.0, 0.0], [0.0, 1.0]]), 0.1)
        np.testing.assert_array_equal(positive_candidates(adj, 0), [0])

    def test_index_out_of_range(self):
        with self.assertRaises(InvalidParameterError):
            positive_candidates(self.adj, 4)

    def test_ranking(self):
        np.testing.assert_array_equal(neighbour_ranking(self.adj, A), [A, B, C, D])

    def test_identical_rows_tie_by_index(self):
        table = init_table([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        adj = build_adjacency(table, 0.5)
        np.testing.assert_array_equal(neighbour_ranking(adj, 2), [2, 1, 3, 0])

    def test_unwritten_ranked_last(self):
        table = LookupTable.empty(4, 2)
        for i, row in ((0, [1.0, 0.0]), (2, [0.0, 1.0]), (3, [0.0, 1.0])):
            table.write_row(i, row)
        with self.assertLogs('reid.gsmlp', level='WARNING'):
            adj = build_adjacency(table, 0.5)
        ranking = neighbour_ranking(adj, 0)
        self.assertEqual(ranking[0], 0)
        self.assertEqual(ranking[-1], 1)


class PredictorTests(SimpleTestCase):
    def setUp(self):
        self.table = four_node_table()
        self.adj = build_adjacency(self.table, 0.9)

    def test_gsmlp_four_node(self):
        np.testing.assert_array_equal(predict_multilabel(self.adj, A), [1, 1, 0, 0])

    def test_gsmlp_single_node(self):
        adj = build_adjacency(init_table([[1.0, 0.0]]), 0.6)
        np.testing.assert_array_equal(predict_multilabel(adj, 0), [True])

    def test_high_threshold_gives_self_only(self):
        adj = build_adjacency(self.table, 0.999)
        for i in range(4):
            np.testing.assert_array_equal(predict_multilabel(adj, i), np.eye(4, dtype=bool)[i])
            np.testing.assert_array_equal(pss_predict(adj, i), np.eye(4, dtype=bool)[i])

    def test_pss_four_node(self):
        np.testing.assert_array_equal(pss_predict(self.adj, A), [1, 1, 0, 0])

    def test_dense_graph_predicts_everything(self):
        adj = build_adjacency(self.table, -1 + EPS)
        for i in range(4):
            self.assertTrue(pss_predict(adj, i).all())
            self.assertTrue(predict_multilabel(adj, i).all())

    def test_knn_nearest(self):
        np.testing.assert_array_equal(knn_predict(self.table, A, 1), [1, 1, 0, 0])

    def test_knn_all(self):
        self.assertTrue(knn_predict(self.table, D, 3).all())

    def test_knn_c_out_of_range(self):
        for c in (0, 4):
            with self.assertRaises(InvalidParameterError):
                knn_predict(self.table, A, c)

    def test_single_class(self):
        np.testing.assert_array_equal(single_class_labels(3), np.eye(3, dtype=bool))

    def test_predict_labels_dispatch(self):
        np.testing.assert_array_equal(
            predict_labels(self.table, 'gsmlp', 0.9),
            [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]],
        )
        self.assertEqual(predict_labels(self.table, 'knn', knn_c=2).sum(), 12)
        np.testing.assert_array_equal(predict_labels(self.table, 'single'), np.eye(4, dtype=bool))

    def test_unknown_predictor(self):
        with self.assertRaises(InvalidParameterError):
            predict_labels(self.table, 'kmeans')


class PredictorPropertyTests(SimpleTestCase):
    """Structural properties over many random tables"""

    def test_random_tables(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n, d = rng.integers(1, 12), rng.integers(2, 5)
            tau = rng.uniform(-0.5, 0.95)
            table = init_table(random_unit(rng, n, d))
            adj = build_adjacency(table, tau)
            for i in range(n):
                candidates = positive_candidates(adj, i)
                ranking = neighbour_ranking(adj, i)
                gsmlp = predict_multilabel(adj, i)
                pss = pss_predict(adj, i)

                np.testing.assert_array_equal(np.sort(ranking), np.arange(n))
                self.assertEqual(ranking[0], i)
                self.assertEqual(len(ranking[:len(candidates)]), len(candidates))
                self.assertTrue(gsmlp[i])
                self.assertFalse(np.any(gsmlp & ~pss))
                np.testing.assert_array_equal(np.flatnonzero(pss), candidates)

    def test_raising_tau_never_adds_candidates(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            table = init_table(random_unit(rng, 8, 3))
            low, high = np.sort(rng.uniform(-0.9, 1.0, size=2))
            loose, strict = build_adjacency(table, low), build_adjacency(table, high)
            for i in range(8):
                self.assertTrue(set(positive_candidates(strict, i)) <= set(positive_candidates(loose, i)))


class LabelsCsvTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'labels.csv'

    def tearDown(self):
        self.tmp.cleanup()

    def test_format(self):
        write_labels_csv(self.path, predict_labels(four_node_table(), 'gsmlp', 0.9))
        lines = self.path.read_text().splitlines()
        self.assertEqual(lines, ['index,positives', '0,0;1', '1,0;1', '2,2;3', '3,2;3'])

    def test_read_back(self):
        labels = predict_labels(four_node_table(), 'knn', knn_c=1)
        write_labels_csv(self.path, labels)
        np.testing.assert_array_equal(read_labels_csv(self.path), labels)

    def test_bad_header(self):
        self.path.write_text('i,p\n0,0\n')
        with self.assertRaises(DatasetFormatError):
            read_labels_csv(self.path)
