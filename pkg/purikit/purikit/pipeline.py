"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

The three stages wired together:
    build_srd   baseline latents -> per-class clusters -> one dictionary per cluster
    (robust training lives in net.train_robust)
    purify      robust latent -> nearest cluster -> x_low + sparse reconstruction of x_high
plus the evaluation harnesses run on top of them.
"""

import logging
import time

import numpy as np

from purikit import net
from purikit.attack import AttackConfig, run_attack
from purikit.bundle import ArtifactBundle
from purikit.cluster import (
    ClusterDistribution,
    fit_cluster_model,
    match_cluster,
    mahalanobis,
    cluster_lookup,
)
from purikit.common import ClusterKey
from purikit.const import DEFAULT_ATOMS, DEFAULT_FILTER_SIZE, DEFAULT_LAMBDA_L1, DEFAULT_ELBOW_SHARPNESS
from purikit.errors import INVALID_ARGUMENT, EMPTY_SRD, MISSING_CLUSTER, NOT_CONVERGED, SHAPE_MISMATCH
from purikit.object_implem import Object
from purikit.parallel import ordered_map
from purikit.report import EvaluationReport, ReportRow, SampleRecord
from purikit.signal import FrequencyPlan, TikhonovConfig, tikhonov_decompose
from purikit.sparse import AdmmConfig, CbpdnConfig, Dictionary, cbpdn, learn_dictionary, reconstruct
from purikit.tensorio import LabeledDataset, as_image
from purikit.utils import PurikitError, LogFunction, check
from purikit.wrapper import PipelineWrapper

logger = logging.getLogger(__name__)

ATTACK_CHUNK = 256


class SrdEntry(Object):
    def __init__(self, class_id, cluster_index, dictionary: Dictionary, distribution: ClusterDistribution, member_ids):
        self.class_id = int(class_id)
        self.cluster_index = int(cluster_index)
        self.dictionary = dictionary
        self.distribution = distribution
        self.member_ids = np.asarray(member_ids, dtype=np.int64)

    @property
    def key(self) -> ClusterKey:
        return (self.class_id, self.cluster_index)

    def __str__(self):
        return "SrdEntry class: %d, cluster: %d, members: %d, %s" % (
            self.class_id, self.cluster_index, len(self.member_ids), self.dictionary)


class SemanticReconstructionDictionary(Object):
    def __init__(self, entries, metadata: dict = None):
        self.entries = sorted(entries, key=lambda e: e.key)
        self.metadata = dict(metadata) if metadata else {}

    def entry(self, key) -> SrdEntry:
        key = (int(key[0]), int(key[1]))
        for entry in self.entries:
            if entry.key == key:
                return entry
        raise PurikitError.fromPair(INVALID_ARGUMENT, f"no SRD entry {key}")

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return "SRD entries: %s" % [entry.key for entry in self.entries]


class SrdConfig(Object):
    def __init__(
        self,
        psi_max: int = 6,
        atoms: int = DEFAULT_ATOMS,
        filter_size: int = DEFAULT_FILTER_SIZE,
        lambda_l1: float = DEFAULT_LAMBDA_L1,
        outer_iters: int = 10,
        max_images: int = 0,
        elbow_sharpness: float = DEFAULT_ELBOW_SHARPNESS,
        admm: AdmmConfig = None,
        seed: int = 0,
        tikhonov: TikhonovConfig = None,
    ):
        check(psi_max >= 2, INVALID_ARGUMENT, f"psi_max {psi_max} < 2")
        check(max_images >= 0, INVALID_ARGUMENT, f"max_images {max_images} < 0")
        self.psi_max = int(psi_max)
        self.atoms = int(atoms)
        self.filter_size = int(filter_size)
        self.lambda_l1 = float(lambda_l1)
        self.outer_iters = int(outer_iters)
        self.max_images = int(max_images)
        self.elbow_sharpness = float(elbow_sharpness)
        self.admm = admm if admm is not None else AdmmConfig()
        self.seed = int(seed)
        self.tikhonov = tikhonov if tikhonov is not None else TikhonovConfig()

    def toDict(self) -> dict:
        return {
            "psi_max": self.psi_max, "atoms": self.atoms, "filter_size": self.filter_size,
            "lambda_l1": self.lambda_l1, "outer_iters": self.outer_iters,
            "max_images": self.max_images, "elbow_sharpness": self.elbow_sharpness,
            "admm_iters": self.admm.max_iters, "seed": self.seed,
            "tikhonov_lambda": self.tikhonov.lambda_low,
        }

    def __str__(self):
        return str(self.toDict())


class PurifyTrace(Object):
    def __init__(self, class_id, cluster_index, md, diagnostics, sparsity, forced=False):
        self.class_id = class_id
        self.cluster_index = cluster_index
        self.md = md
        self.diagnostics = diagnostics
        self.sparsity = sparsity
        self.forced = forced

    @property
    def converged(self) -> bool:
        return not self.diagnostics.flagged

    def __str__(self):
        return "matched: (%d, %d), md: %.6f, %s" % (
            self.class_id, self.cluster_index, self.md, self.diagnostics)


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _training_images(dataset: LabeledDataset, members: np.ndarray, limit: int, tik_cfg: TikhonovConfig) -> np.ndarray:
    """the high bands of the cluster's images, evenly thinned to limit"""
    if limit and len(members) > limit:
        members = members[np.linspace(0, len(members) - 1, limit).round().astype(np.int64)]
    images = dataset.images[members]
    plan = FrequencyPlan(images.shape[1], images.shape[2])
    return np.stack([tikhonov_decompose(image, tik_cfg, plan)[1] for image in images])


@LogFunction("stage", logging.DEBUG)
def build_srd(
    baseline_params: net.NetworkParams,
    dataset: LabeledDataset,
    cfg: SrdConfig,
    wrapper: PipelineWrapper = None,
    threads: int = 1,
) -> SemanticReconstructionDictionary:
    """Clusters every class's baseline latents and learns one dictionary from
    the high bands of each cluster's own images, the band purify reconstructs."""
    latentAll = net.latents(baseline_params, dataset.images)
    models = []
    for classId in range(dataset.class_count):
        ids = np.flatnonzero(dataset.labels == classId)
        if len(ids) == 0:
            logger.warning("build_srd: class %d has no training samples", classId)
            continue
        model = fit_cluster_model(
            classId, latentAll[ids], ids, cfg.psi_max, _derived_seed(cfg.seed, classId),
            cfg.elbow_sharpness, wrapper,
        )
        logger.info("build_srd: %s", model)
        models.append(model)
    check(models, EMPTY_SRD, "")

    jobs = [
        (model.class_id, index, model.member_ids[index], model.distributions[index])
        for model in models
        for index in range(model.cluster_count)
    ]

    def learn(job):
        (classId, index, members, _) = job
        return learn_dictionary(
            _training_images(dataset, members, cfg.max_images, cfg.tikhonov),
            cfg.atoms, cfg.filter_size, cfg.lambda_l1, cfg.admm,
            _derived_seed(cfg.seed, classId, index), cfg.outer_iters, wrapper,
        )

    dictionaries = ordered_map(learn, jobs, threads)
    entries = [
        SrdEntry(classId, index, dictionary, distribution, members)
        for ((classId, index, members, distribution), dictionary) in zip(jobs, dictionaries)
    ]
    metadata = {
        "srd": cfg.toDict(),
        "wcss_curves": {str(model.class_id): list(model.wcss_curve) for model in models},
    }
    return SemanticReconstructionDictionary(entries, metadata)


def purify(
    x,
    robust_params: net.NetworkParams,
    phi: SemanticReconstructionDictionary,
    tik_cfg: TikhonovConfig,
    cbpdn_cfg: CbpdnConfig,
    entry_override=None,
    plan: FrequencyPlan = None,
) -> tuple:
    """x_pur = clamp(x_low + reconstruction of x_high with the dictionary of
    the cluster nearest to the robust latent of x). entry_override forces a
    (class_id, cluster_index) instead of the nearest one. Returns (x_pur, trace)."""
    if not phi.entries:
        raise PurikitError.fromPair(EMPTY_SRD)
    x = as_image(x)
    (_, latent, _) = net.forward(robust_params, x)
    if entry_override is not None:
        entry = phi.entry(entry_override)
        distance = mahalanobis(latent, entry.distribution)
    else:
        (entry, distance) = match_cluster(latent, phi)

    if plan is None or (plan.height, plan.width) != x.shape[:2]:
        plan = FrequencyPlan(x.shape[0], x.shape[1])
    (low, high) = tikhonov_decompose(x, tik_cfg, plan)
    (maps, diagnostics) = cbpdn(entry.dictionary, high, cbpdn_cfg.lambda_l1, cbpdn_cfg.admm, plan)
    purified = np.clip(low + reconstruct(entry.dictionary, maps, plan), 0.0, 1.0)
    trace = PurifyTrace(
        entry.class_id, entry.cluster_index, distance, diagnostics, maps.sparsity(),
        entry_override is not None,
    )
    if diagnostics.flagged:
        logger.debug("purify: flagged solve %s", trace)
    return (purified, trace)


class Purifier(Object):
    """robust latent extractor + SRD + solver settings, applied per sample"""

    def __init__(self, robust_params, phi, tik_cfg: TikhonovConfig, cbpdn_cfg: CbpdnConfig):
        self.robust_params = robust_params
        self.phi = phi
        self.tik_cfg = tik_cfg
        self.cbpdn_cfg = cbpdn_cfg

    def purifyAll(self, images, threads: int = 1, wrapper: PipelineWrapper = None, entry_override=None) -> tuple:
        images = np.asarray(images, dtype=np.float64)

        def one(index):
            return purify(images[index], self.robust_params, self.phi, self.tik_cfg, self.cbpdn_cfg, entry_override)

        results = ordered_map(one, range(len(images)), threads)
        flagged = 0
        for (index, (_, trace)) in enumerate(results):
            flagged += int(not trace.converged)
            if wrapper is not None:
                wrapper.purifyEnd(index, trace.class_id, trace.cluster_index, trace.md, trace.converged)
        if flagged and wrapper is not None:
            wrapper.warning(NOT_CONVERGED.code(), f"purify: {flagged} of {len(results)} sparse codes not converged")
        if not results:
            return (np.zeros_like(images), [])
        return (np.stack([purified for (purified, _) in results]), [trace for (_, trace) in results])

    def __str__(self):
        return "Purifier %s, tikhonov: %s, cbpdn: %s" % (len(self.phi), self.tik_cfg, self.cbpdn_cfg)


def attack_dataset(params, images, labels, cfg: AttackConfig, threads: int = 1) -> np.ndarray:
    """crafts adversarial copies chunk by chunk, every chunk with its own seed"""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    starts = list(range(0, len(images), ATTACK_CHUNK))

    def chunk(start):
        seeded = cfg.withSeed(_derived_seed(cfg.seed, start // ATTACK_CHUNK))
        return run_attack(params, images[start:start + ATTACK_CHUNK], labels[start:start + ATTACK_CHUNK], seeded)

    if not starts:
        return images.copy()
    return np.concatenate(ordered_map(chunk, starts, threads))


def _records(target, condition, labels, predictions, purifiedPredictions, traces) -> list:
    records = []
    for index, label in enumerate(labels):
        trace = traces[index] if traces else None
        records.append(SampleRecord(
            target, condition, index, int(label), int(predictions[index]),
            None if purifiedPredictions is None else int(purifiedPredictions[index]),
            None if trace is None else trace.class_id,
            None if trace is None else trace.cluster_index,
            None if trace is None else float(trace.md),
            None if trace is None else trace.converged,
        ))
    return records


def evaluate(
    classifier_params: net.NetworkParams,
    dataset: LabeledDataset,
    attack_cfgs=(),
    purifier: Purifier = None,
    target: str = "baseline",
    threads: int = 1,
    wrapper: PipelineWrapper = None,
    purified_clean: tuple = None,
) -> EvaluationReport:
    """One row for clean inputs plus one per attack configuration, each with
    plain and (when a purifier is given) purified accuracy. Attacks are
    crafted against classifier_params, which also classifies the purified
    images."""
    if isinstance(attack_cfgs, AttackConfig):
        attack_cfgs = [attack_cfgs]
    report = EvaluationReport()
    labels = dataset.labels
    conditions = [("clean", None)] + [(cfg.label(), cfg) for cfg in attack_cfgs]
    for (condition, cfg) in conditions:
        started = time.perf_counter()
        if cfg is None:
            inputs = dataset.images
        else:
            inputs = attack_dataset(classifier_params, dataset.images, labels, cfg, threads)
        predictions = net.predict(classifier_params, inputs)

        purifiedPredictions = None
        traces = None
        if purifier is not None:
            if cfg is None and purified_clean is not None:
                (purified, traces) = purified_clean
            else:
                (purified, traces) = purifier.purifyAll(inputs, threads, wrapper)
            purifiedPredictions = net.predict(classifier_params, purified)

        row = ReportRow(
            target, condition, len(labels),
            float(np.mean(predictions == labels)) if len(labels) else 0.0,
            None if purifiedPredictions is None else (
                float(np.mean(purifiedPredictions == labels)) if len(labels) else 0.0),
        )
        report.rows.append(row)
        report.records.extend(_records(target, condition, labels, predictions, purifiedPredictions, traces))
        report.runtime[f"{target}/{condition}"] = time.perf_counter() - started
        logger.info("evaluate: %s", row)
    return report


def evaluate_targets(
    targets,
    dataset: LabeledDataset,
    attack_cfgs=(),
    purifier: Purifier = None,
    threads: int = 1,
    wrapper: PipelineWrapper = None,
) -> EvaluationReport:
    """evaluate for several (name, params) targets behind one purifier; the
    purified clean set is shared between targets."""
    report = EvaluationReport()
    shared = None
    if purifier is not None and targets:
        shared = purifier.purifyAll(dataset.images, threads, wrapper)
    for (name, params) in targets:
        report.merge(evaluate(params, dataset, attack_cfgs, purifier, name, threads, wrapper, shared))
    return report


def cluster_influence(
    images, labels, classifier_params, purifier: Purifier, threads: int = 1
) -> list:
    """Accuracy of classifier_params on images purified with each SRD entry
    forced, followed by the accuracy under automatic matching. Returns a list
    of (label, accuracy)."""
    labels = np.asarray(labels, dtype=np.int64)
    rows = []
    for entry in purifier.phi.entries:
        (purified, _) = purifier.purifyAll(images, threads, entry_override=entry.key)
        rows.append((f"class{entry.class_id}/cluster{entry.cluster_index}",
                     net.accuracy(classifier_params, purified, labels)))
    (purified, _) = purifier.purifyAll(images, threads)
    rows.append(("matched", net.accuracy(classifier_params, purified, labels)))
    return rows


def mean_adversarial_md(
    params: net.NetworkParams,
    dataset: LabeledDataset,
    phi: SemanticReconstructionDictionary,
    attack_cfg: AttackConfig,
    use_recorded: bool = False,
    threads: int = 1,
) -> float:
    """Mean Mahalanobis distance between the latents (under params) of
    adversarial inputs and the cluster of the clean sample. With use_recorded
    the dataset is the training split and the cluster is the one recorded in
    phi; otherwise it is the sample's own-class cluster nearest to the clean
    latent."""
    check(len(dataset) > 0, SHAPE_MISMATCH, "empty dataset")
    adversarial = attack_dataset(params, dataset.images, dataset.labels, attack_cfg, threads)
    advLatents = net.latents(params, adversarial)
    if use_recorded:
        lookup = cluster_lookup(phi)
        if len(lookup) < len(dataset):
            raise PurikitError.fromPair(MISSING_CLUSTER, "phi does not cover the dataset")
        dists = [lookup[idx] for idx in range(len(dataset))]
    else:
        cleanLatents = net.latents(params, dataset.images)
        dists = []
        for (latent, label) in zip(cleanLatents, dataset.labels):
            own = [entry for entry in phi.entries if entry.class_id == int(label)]
            if not own:
                raise PurikitError.fromPair(MISSING_CLUSTER, f"no cluster for class {label}")
            dists.append(match_cluster(latent, own)[0].distribution)
    return float(np.mean([mahalanobis(latent, dist) for latent, dist in zip(advLatents, dists)]))


def srd_to_bundle(phi: SemanticReconstructionDictionary, manifest: dict = None) -> ArtifactBundle:
    arrays = {}
    entries = []
    for (position, entry) in enumerate(phi.entries):
        prefix = f"entry{position}_"
        arrays[prefix + "atoms"] = entry.dictionary.atoms
        arrays[prefix + "mean"] = entry.distribution.mean
        arrays[prefix + "covariance"] = entry.distribution.covariance
        arrays[prefix + "inverse"] = entry.distribution.inverse
        arrays[prefix + "member_ids"] = entry.member_ids
        entries.append({
            "class_id": entry.class_id,
            "cluster_index": entry.cluster_index,
            "pseudo_flag": entry.distribution.pseudo_flag,
            "atom_count": entry.dictionary.atom_count,
            "filter_size": entry.dictionary.filter_size,
            "channels": entry.dictionary.channels,
            "lambda_l1": entry.dictionary.lambda_l1,
            "seed": entry.dictionary.seed,
            "history": entry.dictionary.history,
        })
    meta = {"kind": "srd", "entries": entries}
    meta.update(phi.metadata)
    if manifest:
        meta.update(manifest)
    return ArtifactBundle(meta, arrays)


def srd_from_bundle(bundle: ArtifactBundle) -> SemanticReconstructionDictionary:
    check(
        bundle.manifest.get("kind") == "srd",
        INVALID_ARGUMENT,
        f"expected an srd bundle, got '{bundle.manifest.get('kind')}'",
    )
    entries = []
    for (position, meta) in enumerate(bundle.manifest.get("entries", [])):
        prefix = f"entry{position}_"
        dictionary = Dictionary(
            bundle.arrays[prefix + "atoms"], meta.get("lambda_l1"), meta.get("seed"), meta.get("history"))
        distribution = ClusterDistribution(
            bundle.arrays[prefix + "mean"],
            bundle.arrays[prefix + "covariance"],
            bundle.arrays[prefix + "inverse"],
            bool(meta.get("pseudo_flag")),
        )
        entries.append(SrdEntry(
            meta["class_id"], meta["cluster_index"], dictionary, distribution,
            bundle.arrays[prefix + "member_ids"]))
    metadata = {key: val for key, val in bundle.manifest.items() if key not in ("kind", "entries")}
    return SemanticReconstructionDictionary(entries, metadata)
