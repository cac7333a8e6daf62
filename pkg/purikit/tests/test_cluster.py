"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import types
import unittest

import numpy as np

from purikit import cluster
from purikit.cluster import (
    ClusterDistribution,
    choose_elbow,
    cluster_lookup,
    effective_psi_max,
    fit_cluster_model,
    fit_distribution,
    kmeans,
    mahalanobis,
    mahalanobis_many,
    match_cluster,
    select_cluster_count,
)
from purikit.utils import PurikitError
from purikit.wrapper import PipelineWrapper


def triangle_blobs(rng, per_blob=40, side=30.0, sigma=1.0):
    corners = np.array([[0.0, 0.0], [side, 0.0], [side / 2.0, side * np.sqrt(3.0) / 2.0]])
    return np.concatenate([corner + sigma * rng.standard_normal((per_blob, 2)) for corner in corners])


def entry(class_id, cluster_index, mean, member_ids=()):
    k = len(mean)
    return types.SimpleNamespace(
        class_id=class_id,
        cluster_index=cluster_index,
        distribution=ClusterDistribution(mean, np.eye(k), np.eye(k)),
        member_ids=np.asarray(member_ids, dtype=np.int64),
    )


class RecordingWrapper(PipelineWrapper):
    def __init__(self):
        PipelineWrapper.__init__(self)
        self.calls = []

    def warning(self, code, text):
        self.calls.append(("warning", code))

    def clusterMerged(self, classId, fromCluster, intoCluster, members):
        self.calls.append(("clusterMerged", classId, fromCluster, intoCluster, members))

    def clusterCountSelected(self, classId, psiStar, wcssCurve):
        self.calls.append(("clusterCountSelected", classId, psiStar))


class ClusterTestCase(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(5)

    def tearDown(self):
        pass

    def test_single_cluster_is_mean(self):
        points = self.rng.standard_normal((20, 3))
        (assignments, centers, wcss) = kmeans(points, 1, 0)
        np.testing.assert_allclose(centers[0], points.mean(axis=0))
        self.assertFalse(np.any(assignments))
        self.assertAlmostEqual(wcss, ((points - points.mean(axis=0)) ** 2).sum())

    def test_exact_locations(self):
        locations = np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0]])
        points = np.repeat(locations, 4, axis=0)
        (assignments, centers, wcss) = kmeans(points, 3, 1)
        self.assertEqual(wcss, 0.0)
        found = sorted(map(tuple, centers))
        self.assertEqual(found, sorted(map(tuple, locations)))

    def test_two_blobs(self):
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            points = np.concatenate([
                rng.normal((-10.0, 0.0), 0.1, size=(25, 2)),
                rng.normal((10.0, 0.0), 0.1, size=(25, 2)),
            ])
            (_, centers, _) = kmeans(points, 2, seed)
            ordered = centers[np.argsort(centers[:, 0])]
            self.assertLess(np.linalg.norm(ordered[0] - (-10.0, 0.0)), 0.5)
            self.assertLess(np.linalg.norm(ordered[1] - (10.0, 0.0)), 0.5)

    def test_wcss_never_increases(self):
        points = self.rng.standard_normal((200, 4))
        history = []
        kmeans(points, 5, 3, history)
        self.assertGreater(len(history), 0)
        for (before, after) in zip(history, history[1:]):
            self.assertLessEqual(after, before + 1e-9)

    def test_too_many_clusters(self):
        points = np.repeat([[1.0, 1.0], [2.0, 2.0]], 3, axis=0)
        with self.assertRaises(PurikitError) as ctx:
            kmeans(points, 3, 0)
        self.assertEqual(ctx.exception.code, 604)

    def test_choose_elbow(self):
        self.assertEqual(choose_elbow([100.0, 10.0, 9.0, 8.5]), 2)
        self.assertEqual(choose_elbow([300.0, 150.0, 6.0, 5.0, 4.5]), 3)
        self.assertEqual(choose_elbow([10.0, 9.8, 9.7]), 1)
        self.assertEqual(choose_elbow([0.0, 0.0, 0.0]), 1)
        self.assertEqual(choose_elbow([5.0]), 1)
        self.assertEqual(choose_elbow([10.0, 2.0]), 2)
        # smooth convex curve: the gate rejects the weak bend
        self.assertEqual(choose_elbow([100.0, 60.0, 40.0, 30.0, 24.0]), 1)

    def test_identical_points(self):
        points = np.ones((10, 3))
        (psi, curve) = select_cluster_count(points, 4, 0)
        self.assertEqual(psi, 1)
        self.assertEqual(curve, [0.0])

    def test_three_gaussians(self):
        hits = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            (psi, curve) = select_cluster_count(triangle_blobs(rng), 6, seed)
            self.assertEqual(len(curve), 6)
            hits += psi == 3
        self.assertGreaterEqual(hits, 9)

    def test_single_gaussian(self):
        points = self.rng.standard_normal((300, 2))
        (psi, _) = select_cluster_count(points, 6, 0)
        self.assertEqual(psi, 1)

    def test_selection_is_deterministic(self):
        points = triangle_blobs(self.rng)
        self.assertEqual(select_cluster_count(points, 5, 7), select_cluster_count(points, 5, 7))

    def test_psi_max_lowered(self):
        wrapper = RecordingWrapper()
        points = self.rng.standard_normal((4, 2))
        self.assertEqual(effective_psi_max(points, 6, wrapper), 3)
        self.assertEqual(wrapper.calls[0][0], "warning")
        self.assertEqual(effective_psi_max(self.rng.standard_normal((20, 2)), 6), 6)

    def test_fit_distribution_two_points(self):
        dist = fit_distribution([[0.0, 2.0], [4.0, 6.0]])
        np.testing.assert_allclose(dist.mean, [2.0, 4.0])
        self.assertTrue(dist.pseudo_flag)

    def test_fit_distribution_sampling(self):
        members = self.rng.standard_normal((10000, 4))
        dist = fit_distribution(members)
        self.assertFalse(dist.pseudo_flag)
        self.assertLess(np.abs(dist.covariance - np.eye(4)).max(), 0.1)
        np.testing.assert_allclose(dist.covariance, dist.covariance.T)
        np.testing.assert_allclose(dist.inverse @ dist.covariance, np.eye(4), atol=1e-8)

    def test_fit_distribution_rank_deficient(self):
        basis = self.rng.standard_normal((2, 5))
        members = self.rng.standard_normal((50, 2)) @ basis + 3.0
        dist = fit_distribution(members)
        self.assertTrue(dist.pseudo_flag)
        sigma = dist.covariance
        error = np.linalg.norm(sigma @ dist.inverse @ sigma - sigma) / np.linalg.norm(sigma)
        self.assertLess(error, 1e-6)
        self.assertGreaterEqual(np.linalg.eigvalsh(sigma).min(), -1e-8)

    def test_fit_distribution_too_few(self):
        with self.assertRaises(PurikitError) as ctx:
            fit_distribution([[1.0, 2.0]])
        self.assertEqual(ctx.exception.code, 605)

    def test_mahalanobis(self):
        mean = np.array([1.0, -1.0, 0.5])
        identity = ClusterDistribution(mean, np.eye(3), np.eye(3))
        self.assertEqual(mahalanobis(mean, identity), 0.0)
        r = self.rng.standard_normal(3)
        self.assertAlmostEqual(mahalanobis(r, identity), np.linalg.norm(r - mean), delta=1e-9)

        dist = fit_distribution(self.rng.standard_normal((40, 3)) @ self.rng.standard_normal((3, 3)))
        d = r - dist.mean
        expected = np.sqrt(d @ np.linalg.solve(dist.covariance, d))
        self.assertAlmostEqual(mahalanobis(r, dist), expected, delta=1e-8 * max(expected, 1.0))

        many = mahalanobis_many(np.stack([r, dist.mean]), dist)
        self.assertAlmostEqual(many[0], mahalanobis(r, dist), places=12)
        self.assertAlmostEqual(many[1], 0.0, places=12)

        with self.assertRaises(PurikitError):
            mahalanobis(np.zeros(4), identity)

    def test_negative_quadratic_form(self):
        broken = ClusterDistribution(np.zeros(2), np.eye(2), -np.eye(2))
        with self.assertRaises(PurikitError) as ctx:
            mahalanobis(np.ones(2), broken)
        self.assertEqual(ctx.exception.code, 606)
        tiny = ClusterDistribution(np.zeros(1), np.eye(1), np.array([[-1e-12]]))
        self.assertEqual(mahalanobis(np.ones(1), tiny), 0.0)

    def test_match_cluster(self):
        near = entry(0, 0, [0.0, 0.0])
        far = entry(1, 0, [4.0, 0.0])
        (best, distance) = match_cluster(np.array([1.0, 0.0]), [far, near])
        self.assertIs(best, near)
        self.assertAlmostEqual(distance, 1.0)

        (only, _) = match_cluster(np.array([100.0, 100.0]), [far])
        self.assertIs(only, far)

        with self.assertRaises(PurikitError) as ctx:
            match_cluster(np.zeros(2), [])
        self.assertEqual(ctx.exception.code, 608)

    def test_match_cluster_ties(self):
        a = entry(2, 1, [1.0, 0.0])
        b = entry(0, 3, [-1.0, 0.0])
        c = entry(0, 1, [0.0, 1.0])
        for order in ([a, b, c], [c, b, a], [b, a, c]):
            (best, _) = match_cluster(np.zeros(2), order)
            self.assertEqual((best.class_id, best.cluster_index), (0, 1))

    def test_merge_small(self):
        wrapper = RecordingWrapper()
        points = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [10.0, 10.0]])
        centers = np.array([[0.1, 0.0], [10.0, 10.0]])
        (assignments, merged) = cluster._merge_small(points, np.array([0, 0, 0, 1]), centers, 2, 4, wrapper)
        self.assertEqual(list(assignments), [0, 0, 0, 0])
        self.assertEqual(len(merged), 1)
        np.testing.assert_allclose(merged[0], points.mean(axis=0))
        self.assertIn(("clusterMerged", 4, 1, 0, 1), wrapper.calls)

    def test_fit_cluster_model(self):
        wrapper = RecordingWrapper()
        points = triangle_blobs(self.rng, per_blob=30)
        ids = np.arange(len(points)) + 100
        model = fit_cluster_model(2, points, ids, 6, 11, wrapper=wrapper)
        self.assertEqual(model.cluster_count, 3)
        self.assertEqual(sorted(np.concatenate(model.member_ids)), list(ids))
        self.assertEqual(sorted(len(group) for group in model.member_ids), [30, 30, 30])
        self.assertIn(("clusterCountSelected", 2, 3), wrapper.calls)

        lookup = cluster_lookup([
            types.SimpleNamespace(member_ids=group, distribution=dist)
            for group, dist in zip(model.member_ids, model.distributions)
        ])
        self.assertEqual(len(lookup), len(points))

    def test_cluster_lookup(self):
        lookup = cluster_lookup([entry(0, 0, [0.0], [3, 5]), entry(1, 0, [1.0], [4])])
        self.assertEqual(sorted(lookup), [3, 4, 5])
        self.assertEqual(lookup[4].mean[0], 1.0)


if "__main__" == __name__:
    unittest.main()
