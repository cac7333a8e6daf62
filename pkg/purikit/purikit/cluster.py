"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Per-class clustering of latent vectors: k-means with k-means++ seeding, elbow
selection of the cluster count, Gaussian statistics per cluster and the
Mahalanobis distance used to pick a reconstruction dictionary.
"""

import logging

import numpy as np
import scipy.linalg
from sklearn.cluster import kmeans_plusplus

from purikit.common import ClusterLookup
from purikit.const import (
    KMEANS_MAX_ITERS,
    KMEANS_RESTARTS,
    FLAT_CURVE_DROP,
    DEFAULT_ELBOW_SHARPNESS,
    SHRINKAGE_SCALE,
    PINV_CUTOFF,
    NEGATIVE_QF_TOLERANCE,
)
from purikit.errors import (
    INVALID_ARGUMENT,
    SHAPE_MISMATCH,
    EMPTY_INPUT,
    CLUSTER_COUNT,
    TOO_FEW_MEMBERS,
    NEGATIVE_QUADRATIC_FORM,
    NON_MONOTONE_WCSS,
    EMPTY_SRD,
)
from purikit.object_implem import Object
from purikit.utils import PurikitError, check, floatMaxString
from purikit.wrapper import PipelineWrapper

logger = logging.getLogger(__name__)

WCSS_SLACK = 1e-9


class ClusterDistribution(Object):
    def __init__(self, mean, covariance, inverse, pseudo_flag: bool = False):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.covariance = np.asarray(covariance, dtype=np.float64)
        self.inverse = np.asarray(inverse, dtype=np.float64)
        self.pseudo_flag = bool(pseudo_flag)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __str__(self):
        return "ClusterDistribution k: %d, pseudo: %s, trace: %s" % (
            self.dim, self.pseudo_flag, floatMaxString(float(np.trace(self.covariance)), 6))


class ClusterModel(Object):
    def __init__(self, class_id, assignments, centers, distributions, member_ids, wcss_curve=None):
        self.class_id = int(class_id)
        self.assignments = np.asarray(assignments, dtype=np.int64)
        self.centers = np.asarray(centers, dtype=np.float64)
        self.distributions = list(distributions)
        self.member_ids = [np.asarray(ids, dtype=np.int64) for ids in member_ids]
        self.wcss_curve = list(wcss_curve) if wcss_curve else []

    @property
    def cluster_count(self) -> int:
        return len(self.distributions)

    def __str__(self):
        return "ClusterModel class: %d, psi: %d, sizes: %s" % (
            self.class_id, self.cluster_count, [len(ids) for ids in self.member_ids])


def _points(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    check(points.ndim == 2 and len(points) > 0, EMPTY_INPUT, "no latent vectors")
    check(np.all(np.isfinite(points)), INVALID_ARGUMENT, "non-finite latent vector")
    return points


def _sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, np.newaxis, :] - centers[np.newaxis, :, :]
    return (diff ** 2).sum(axis=2)


def _centers(points, assignments, psi) -> np.ndarray:
    return np.stack([points[assignments == j].mean(axis=0) for j in range(psi)])


def _wcss(points, assignments, centers) -> float:
    return float(((points - centers[assignments]) ** 2).sum())


def _repair_empty(d2: np.ndarray, assignments: np.ndarray, psi: int) -> np.ndarray:
    """moves the point farthest from its center into each empty cluster"""
    assignments = assignments.copy()
    for j in range(psi):
        if np.any(assignments == j):
            continue
        counts = np.bincount(assignments, minlength=psi)
        own = d2[np.arange(len(assignments)), assignments]
        own = np.where(counts[assignments] > 1, own, -1.0)
        farthest = int(np.argmax(own))
        logger.debug("kmeans: reseeding empty cluster %d with point %d", j, farthest)
        assignments[farthest] = j
    return assignments


def distinct_count(points) -> int:
    return len(np.unique(_points(points), axis=0))


def kmeans(points, psi: int, seed: int, history: list = None) -> tuple:
    """Lloyd iterations from k-means++ seeding. Returns (assignments,
    centers, wcss). When given, history receives the WCSS after every
    iteration; it never increases."""
    points = _points(points)
    check(psi >= 1, INVALID_ARGUMENT, f"psi {psi} < 1")
    distinct = distinct_count(points)
    if psi > distinct:
        raise PurikitError.fromPair(CLUSTER_COUNT, f"psi {psi} > {distinct} distinct points")

    if psi == 1:
        centers = points.mean(axis=0)[np.newaxis]
        assignments = np.zeros(len(points), dtype=np.int64)
        wcss = _wcss(points, assignments, centers)
        if history is not None:
            history.append(wcss)
        return (assignments, centers, wcss)

    (centers, _) = kmeans_plusplus(points, n_clusters=psi, random_state=seed)
    centers = np.asarray(centers, dtype=np.float64)
    assignments = None
    wcss = np.inf
    for iteration in range(KMEANS_MAX_ITERS):
        d2 = _sq_dist(points, centers)
        update = _repair_empty(d2, np.argmin(d2, axis=1), psi)
        if assignments is not None and np.array_equal(update, assignments):
            break
        assignments = update
        centers = _centers(points, assignments, psi)
        current = _wcss(points, assignments, centers)
        if current > wcss * (1.0 + WCSS_SLACK) + WCSS_SLACK:
            raise PurikitError.fromPair(
                NON_MONOTONE_WCSS, f"iteration {iteration}: {current!r} after {wcss!r}"
            )
        wcss = current
        if history is not None:
            history.append(wcss)
    return (assignments, centers, wcss)


def _restart_seed(seed: int, psi: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, psi, restart]).generate_state(1)[0])


def best_kmeans(points, psi: int, seed: int, restarts: int = KMEANS_RESTARTS) -> tuple:
    best = None
    for restart in range(restarts):
        result = kmeans(points, psi, _restart_seed(seed, psi, restart))
        if best is None or result[2] < best[2]:
            best = result
        if psi == 1:
            break
    return best


def effective_psi_max(points, psi_max: int, wrapper: PipelineWrapper = None) -> int:
    points = _points(points)
    limit = min(psi_max, len(points) - 1, distinct_count(points))
    if limit < psi_max:
        text = f"psi_max lowered from {psi_max} to {max(limit, 1)} for {len(points)} points"
        logger.warning(text)
        if wrapper is not None:
            wrapper.warning(CLUSTER_COUNT.code(), text)
    return max(limit, 1)


def choose_elbow(curve, sharpness: float = DEFAULT_ELBOW_SHARPNESS) -> int:
    """curve[i] is the WCSS for i + 1 clusters"""
    curve = [float(val) for val in curve]
    top = len(curve)
    if top < 2:
        return 1
    first = curve[0]
    if first <= 0.0 or (first - curve[-1]) / first < FLAT_CURVE_DROP:
        return 1
    if top == 2:
        return 2

    best = None
    bestBend = -np.inf
    for psi in range(2, top):
        bend = curve[psi - 2] - 2.0 * curve[psi - 1] + curve[psi]
        if bend > bestBend:
            best = psi
            bestBend = bend
    dropIn = curve[best - 2] - curve[best - 1]
    dropOut = curve[best - 1] - curve[best]
    if dropIn >= sharpness * dropOut:
        return best
    return 1


def select_cluster_count(
    points,
    psi_max: int,
    seed: int,
    sharpness: float = DEFAULT_ELBOW_SHARPNESS,
    wrapper: PipelineWrapper = None,
) -> tuple:
    """Elbow on the WCSS curve for psi = 1 .. psi_max (best of three seeded
    restarts each). Returns (psi_star, wcss_curve)."""
    check(psi_max >= 2, INVALID_ARGUMENT, f"psi_max {psi_max} < 2")
    points = _points(points)
    top = effective_psi_max(points, psi_max, wrapper)
    curve = [best_kmeans(points, psi, seed)[2] for psi in range(1, top + 1)]
    return (choose_elbow(curve, sharpness), curve)


def fit_distribution(members) -> ClusterDistribution:
    """Mean and biased (1/n) covariance. Full rank: a 1e-6 * trace / k ridge
    and a Cholesky inverse. Rank deficient: the raw covariance with its
    Moore-Penrose inverse."""
    members = _points(members)
    (count, dim) = members.shape
    check(count >= 2, TOO_FEW_MEMBERS, f"{count} member(s)")

    mean = members.mean(axis=0)
    centered = members - mean
    covariance = centered.T @ centered / count
    covariance = 0.5 * (covariance + covariance.T)

    (U, s, Vt) = scipy.linalg.svd(covariance)
    cutoff = PINV_CUTOFF * s[0]
    rank = int(np.sum(s > cutoff)) if s[0] > 0 else 0
    if rank == dim:
        ridge = SHRINKAGE_SCALE * np.trace(covariance) / dim
        shrunk = covariance + ridge * np.eye(dim)
        factor = scipy.linalg.cho_factor(shrunk, lower=True)
        inverse = scipy.linalg.cho_solve(factor, np.eye(dim))
        return ClusterDistribution(mean, shrunk, 0.5 * (inverse + inverse.T), False)

    keep = s > cutoff if rank else np.zeros_like(s, dtype=bool)
    inverse = (Vt[keep].T / s[keep]) @ U[:, keep].T
    logger.debug("fit_distribution: rank %d of %d, using pseudo-inverse", rank, dim)
    return ClusterDistribution(mean, covariance, 0.5 * (inverse + inverse.T), True)


def _quadratic_form(displacement: np.ndarray, dist: ClusterDistribution) -> np.ndarray:
    q = np.einsum("...i,ij,...j->...", displacement, dist.inverse, displacement)
    if np.any(q < -NEGATIVE_QF_TOLERANCE):
        raise PurikitError.fromPair(NEGATIVE_QUADRATIC_FORM, f"{float(np.min(q))!r}")
    return np.maximum(q, 0.0)


def mahalanobis(r, dist: ClusterDistribution) -> float:
    r = np.asarray(r, dtype=np.float64)
    check(
        r.shape == dist.mean.shape,
        SHAPE_MISMATCH,
        f"latent {r.shape} vs distribution {dist.mean.shape}",
    )
    return float(np.sqrt(_quadratic_form(r - dist.mean, dist)))


def mahalanobis_many(R, dist: ClusterDistribution) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    check(
        R.ndim == 2 and R.shape[1] == dist.dim,
        SHAPE_MISMATCH,
        f"latents {R.shape} vs distribution {dist.mean.shape}",
    )
    return np.sqrt(_quadratic_form(R - dist.mean, dist))


def _merge_small(points, assignments, centers, psi, classId, wrapper) -> tuple:
    """folds every cluster with fewer than 2 members into the nearest sibling"""
    assignments = assignments.copy()
    while True:
        counts = np.bincount(assignments, minlength=psi)
        alive = [j for j in range(psi) if counts[j] > 0]
        small = [j for j in alive if counts[j] < 2]
        if not small or len(alive) == 1:
            break
        j = small[0]
        others = [o for o in alive if o != j]
        gaps = [float(((centers[o] - centers[j]) ** 2).sum()) for o in others]
        target = others[int(np.argmin(gaps))]
        text = f"class {classId}: cluster {j} with {counts[j]} member(s) merged into cluster {target}"
        logger.warning(text)
        if wrapper is not None:
            wrapper.clusterMerged(classId, j, target, int(counts[j]))
            wrapper.warning(TOO_FEW_MEMBERS.code(), text)
        assignments[assignments == j] = target
        centers[target] = points[assignments == target].mean(axis=0)

    alive = [j for j in range(psi) if np.any(assignments == j)]
    relabel = np.full(psi, -1, dtype=np.int64)
    relabel[alive] = np.arange(len(alive))
    return (relabel[assignments], centers[alive])


def fit_cluster_model(
    class_id: int,
    points,
    member_ids,
    psi_max: int,
    seed: int,
    sharpness: float = DEFAULT_ELBOW_SHARPNESS,
    wrapper: PipelineWrapper = None,
) -> ClusterModel:
    """select_cluster_count, k-means at the chosen count, small-cluster merge
    and one Gaussian per surviving cluster."""
    points = _points(points)
    member_ids = np.asarray(member_ids, dtype=np.int64)
    check(len(member_ids) == len(points), SHAPE_MISMATCH, "one member id per latent vector")
    check(len(points) >= 2, TOO_FEW_MEMBERS, f"class {class_id} has {len(points)} sample(s)")

    if effective_psi_max(points, psi_max) >= 2:
        (psiStar, curve) = select_cluster_count(points, psi_max, seed, sharpness, wrapper)
    else:
        (psiStar, curve) = (1, [best_kmeans(points, 1, seed)[2]])
    if wrapper is not None:
        wrapper.clusterCountSelected(class_id, psiStar, curve)

    (assignments, centers, _) = best_kmeans(points, psiStar, seed)
    (assignments, centers) = _merge_small(points, assignments, centers.copy(), psiStar, class_id, wrapper)
    psi = len(centers)
    distributions = [fit_distribution(points[assignments == j]) for j in range(psi)]
    groups = [member_ids[assignments == j] for j in range(psi)]
    return ClusterModel(class_id, assignments, centers, distributions, groups, curve)


def match_cluster(r, phi):
    """The entry of phi (across every class) with the smallest Mahalanobis
    distance to r; ties go to the smallest (class_id, cluster_index).
    Returns (entry, distance)."""
    entries = list(phi.entries if hasattr(phi, "entries") else phi)
    if not entries:
        raise PurikitError.fromPair(EMPTY_SRD)
    best = None
    for entry in sorted(entries, key=lambda e: (e.class_id, e.cluster_index)):
        distance = mahalanobis(r, entry.distribution)
        if best is None or distance < best[1]:
            best = (entry, distance)
    return best


def cluster_lookup(phi) -> ClusterLookup:
    """sample id -> ClusterDistribution of the cluster holding that sample"""
    entries = phi.entries if hasattr(phi, "entries") else phi
    lookup = {}
    for entry in entries:
        for sampleId in entry.member_ids:
            lookup[int(sampleId)] = entry.distribution
    return lookup
