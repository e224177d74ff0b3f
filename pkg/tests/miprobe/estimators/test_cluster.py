import os
import tempfile
import numpy as np
from unittest import TestCase, main
from miprobe.estimators import cluster


def _blobs(centers, n_per, sigma, seed):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    data = np.concatenate([c + sigma * rng.standard_normal((n_per, centers.shape[1])) for c in centers])
    members = np.repeat(np.arange(centers.shape[0]), n_per)
    return data, members


class TestFitKMeans(TestCase):
    def test_repeated_points(self):
        points = np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0]])
        data = np.repeat(points, 10, axis=0)

        model = cluster.fit_kmeans(data, k=3, seed=0)

        found = sorted(map(tuple, model.centroids.tolist()))
        self.assertEqual(found, sorted(map(tuple, points.tolist())))
        self.assertEqual(model.inertia, 0.0)

    def test_single_cluster_is_mean(self):
        data = np.random.default_rng(3).standard_normal((50, 4))

        model = cluster.fit_kmeans(data, k=1, seed=7)

        np.testing.assert_allclose(model.centroids[0], data.mean(axis=0))
        self.assertAlmostEqual(model.inertia, data.var(axis=0).sum() * 50, places=8)

    def test_two_blobs(self):
        data, members = _blobs([[0.0, 0.0], [10.0, 10.0]], 100, 0.1, seed=1)

        model = cluster.fit_kmeans(data, k=2, seed=0)
        ids = cluster.assign(model, data)

        # cluster numbering is arbitrary; membership must agree
        mapping = {int(ids[members == b][0]) for b in (0, 1)}
        self.assertEqual(len(mapping), 2)
        for b in (0, 1):
            self.assertTrue(np.all(ids[members == b] == ids[members == b][0]))

    def test_inertia_history_non_increasing(self):
        data, _ = _blobs(np.random.default_rng(0).uniform(-5, 5, (6, 3)), 40, 1.0, seed=2)

        model = cluster.fit_kmeans(data, k=6, seed=4)

        history = np.array(model.inertia_history)
        self.assertTrue(np.all(np.diff(history) <= 1e-9 * history[0]))
        self.assertEqual(model.inertia, history[-1])
        self.assertEqual(len(history), model.iterations_run + 1)

    def test_deterministic(self):
        data, _ = _blobs([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 30, 0.8, seed=5)

        first = cluster.fit_kmeans(data, k=3, seed=11)
        second = cluster.fit_kmeans(data, k=3, seed=11)

        self.assertEqual(first.centroids.tobytes(), second.centroids.tobytes())
        self.assertEqual(first.inertia_history, second.inertia_history)

    def test_max_iter_respected(self):
        data, _ = _blobs(np.random.default_rng(1).uniform(-3, 3, (8, 2)), 20, 1.0, seed=6)

        model = cluster.fit_kmeans(data, k=8, max_iter=1, seed=0)

        self.assertEqual(model.iterations_run, 1)

    def test_fixed_point(self):
        data, _ = _blobs([[0.0, 0.0], [4.0, 4.0], [8.0, 0.0]], 30, 0.5, seed=8)
        model = cluster.fit_kmeans(data, k=3, seed=0)
        ids = cluster.assign(model, data)

        refit = cluster.recompute_centroids(data, ids, 3)

        np.testing.assert_allclose(refit, model.centroids, rtol=0, atol=1e-12)
        diff = data - refit[ids]
        self.assertAlmostEqual(float((diff * diff).sum()), model.inertia, places=8)

    def test_errors(self):
        data = np.zeros((3, 2))
        with self.assertRaises(cluster.ClusterError):
            cluster.fit_kmeans(data, k=4)
        with self.assertRaises(cluster.ClusterError):
            cluster.fit_kmeans(data, k=0)
        with self.assertRaises(cluster.ClusterError):
            cluster.fit_kmeans(data, k=2, max_iter=0)
        with self.assertRaises(cluster.ClusterError):
            cluster.fit_kmeans(np.array([[0.0], [np.nan]]), k=1)


class TestAssign(TestCase):
    def test_centroid_rows(self):
        centroids = np.array([[0.0, 0.0], [1.0, 2.0], [-4.0, 3.0]])
        model = cluster.KMeansModel(centroids, seed=0, inertia=0.0, iterations_run=0)

        np.testing.assert_array_equal(cluster.assign(model, centroids), [0, 1, 2])

    def test_tie_goes_to_lowest_index(self):
        centroids = np.array([[10.0, 10.0], [20.0, 20.0], [1.0, 0.0], [30.0, 30.0], [40.0, 40.0], [-1.0, 0.0]])
        model = cluster.KMeansModel(centroids, seed=0, inertia=0.0, iterations_run=0)

        np.testing.assert_array_equal(cluster.assign(model, [[0.0, 0.0]]), [2])

    def test_tie_large_magnitude(self):
        centroids = np.array([[1e6 + 1.0, 0.0], [1e6 - 1.0, 0.0]])
        model = cluster.KMeansModel(centroids, seed=0, inertia=0.0, iterations_run=0)

        np.testing.assert_array_equal(cluster.assign(model, [[1e6, 0.0]]), [0])

    def test_dimension_mismatch(self):
        model = cluster.KMeansModel(np.zeros((2, 3)), seed=0, inertia=0.0, iterations_run=0)

        with self.assertRaises(cluster.ClusterError):
            cluster.assign(model, np.zeros((4, 2)))


class TestRecompute(TestCase):
    def test_empty_cluster_reseeded(self):
        data = np.array([[0.0], [1.0], [10.0]])
        previous = np.array([[0.5], [100.0]])

        centroids = cluster.recompute_centroids(data, np.array([0, 0, 0]), 2, previous=previous)

        np.testing.assert_allclose(centroids, [[11.0 / 3.0], [10.0]])

    def test_empty_cluster_needs_previous(self):
        with self.assertRaises(cluster.ClusterError):
            cluster.recompute_centroids(np.zeros((2, 1)), np.array([0, 0]), 2)


class TestScaler(TestCase):
    def test_standardizes(self):
        data = np.array([[1.0, 5.0], [3.0, 5.0]])

        scaled = cluster.FeatureScaler(data).transform(data)

        np.testing.assert_allclose(scaled, [[-1.0, 0.0], [1.0, 0.0]])


class TestPersistence(TestCase):
    def test_save_and_load(self):
        data, _ = _blobs([[0.0, 0.0], [5.0, 5.0]], 20, 0.3, seed=9)
        model = cluster.fit_kmeans(data, k=2, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'kmeans.fmat')

            cluster.save_kmeans(model, path)
            loaded = cluster.load_kmeans(path)

            self.assertTrue(os.path.exists(path + cluster.SIDECAR_SUFFIX))
        self.assertEqual((loaded.k, loaded.seed), (2, 3))
        self.assertEqual(loaded.inertia, model.inertia)
        np.testing.assert_allclose(loaded.centroids, model.centroids, rtol=1e-6)
        np.testing.assert_array_equal(cluster.assign(loaded, data), cluster.assign(model, data))


if __name__ == '__main__':
    main()
