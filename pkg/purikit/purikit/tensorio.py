"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Dataset ingestion and artifact persistence.

Images are held as float64 arrays of shape H x W x C with intensities in
[0, 1]; a dataset stacks them as N x H x W x C.

Synthetic shape families, one per class, in this fixed order:
    horizontal_bar, vertical_bar, ring, cross, gradient, checker,
    diagonal_bar, disk
"""

import logging
import os

import numpy as np

from purikit.bundle import ArtifactBundle, encode_bundle, decode_bundle
from purikit.common import Image, ImageStack
from purikit.const import CIFAR_SIDE, CIFAR_CHANNELS, CIFAR_RECORD_SIZE, CIFAR_CLASS_COUNT
from purikit.errors import (
    BAD_IMAGE,
    CIFAR_TRUNCATED,
    TOO_MANY_CLASSES,
    INVALID_ARGUMENT,
    MISSING_ARTIFACT,
    SHAPE_MISMATCH,
)
from purikit.object_implem import Object
from purikit.utils import PurikitError, check

logger = logging.getLogger(__name__)

SHAPE_FAMILIES = (
    "horizontal_bar",
    "vertical_bar",
    "ring",
    "cross",
    "gradient",
    "checker",
    "diagonal_bar",
    "disk",
)


class LabeledDataset(Object):
    def __init__(self, images: ImageStack, labels, class_count: int):
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim == 3:
            images = images[..., np.newaxis]
        check(images.ndim == 4, SHAPE_MISMATCH, f"images must be N x H x W x C, got {images.shape}")
        check(
            len(images) == len(labels),
            SHAPE_MISMATCH,
            f"{len(images)} images but {len(labels)} labels",
        )
        check(class_count >= 1, INVALID_ARGUMENT, f"class_count {class_count}")
        if len(labels):
            check(
                labels.min() >= 0 and labels.max() < class_count,
                BAD_IMAGE,
                f"labels outside [0, {class_count})",
            )
        validate_images(images)
        self.images = images
        self.labels = labels
        self.class_count = int(class_count)

    def __len__(self):
        return len(self.labels)

    @property
    def imageShape(self):
        return tuple(self.images.shape[1:])

    def subset(self, ids) -> "LabeledDataset":
        ids = np.asarray(ids, dtype=np.int64)
        return LabeledDataset(self.images[ids], self.labels[ids], self.class_count)

    def __str__(self):
        return "samples: %d, shape: %s, classes: %d" % (
            len(self), self.imageShape, self.class_count)


def validate_images(images: np.ndarray):
    if images.size == 0:
        return
    if not np.all(np.isfinite(images)):
        raise PurikitError.fromPair(BAD_IMAGE, "non-finite intensity")
    lo = images.min()
    hi = images.max()
    if lo < 0.0 or hi > 1.0:
        raise PurikitError.fromPair(BAD_IMAGE, f"intensity range [{lo}, {hi}] leaves [0, 1]")
    check(images.shape[-1] in (1, 3), BAD_IMAGE, f"{images.shape[-1]} channels")


def as_image(x) -> Image:
    """promotes H x W to H x W x 1 and checks the [0, 1] invariant"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., np.newaxis]
    check(x.ndim == 3, SHAPE_MISMATCH, f"image must be H x W x C, got {x.shape}")
    validate_images(x)
    return x


def _shape_mask(family: str, side: int, rng) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    jitter = side / 8.0
    cy = (side - 1) / 2.0 + rng.uniform(-jitter, jitter)
    cx = (side - 1) / 2.0 + rng.uniform(-jitter, jitter)
    half = side * rng.uniform(0.08, 0.14)

    if family == "horizontal_bar":
        return (np.abs(yy - cy) <= half).astype(np.float64)
    if family == "vertical_bar":
        return (np.abs(xx - cx) <= half).astype(np.float64)
    if family == "ring":
        radius = side * rng.uniform(0.26, 0.34)
        dist = np.hypot(yy - cy, xx - cx)
        return (np.abs(dist - radius) <= max(half * 0.75, 0.75)).astype(np.float64)
    if family == "cross":
        arm = side * rng.uniform(0.3, 0.4)
        horiz = (np.abs(yy - cy) <= half * 0.75) & (np.abs(xx - cx) <= arm)
        vert = (np.abs(xx - cx) <= half * 0.75) & (np.abs(yy - cy) <= arm)
        return (horiz | vert).astype(np.float64)
    if family == "gradient":
        slope = rng.uniform(0.8, 1.2)
        return np.clip((xx - cx) * slope / side + 0.5, 0.0, 1.0)
    if family == "checker":
        period = side / 4.0
        phaseY = rng.uniform(0, period * 0.25)
        phaseX = rng.uniform(0, period * 0.25)
        cells = np.floor((yy + phaseY) / period) + np.floor((xx + phaseX) / period)
        return (cells % 2 == 0).astype(np.float64)
    if family == "diagonal_bar":
        return (np.abs((xx - cx) - (yy - cy)) / np.sqrt(2.0) <= half).astype(np.float64)
    if family == "disk":
        radius = side * rng.uniform(0.2, 0.28)
        return (np.hypot(yy - cy, xx - cx) <= radius).astype(np.float64)
    raise PurikitError.fromPair(INVALID_ARGUMENT, f"unknown shape family '{family}'")


def generate_synthetic_dataset(
    class_count: int, per_class: int, side: int, noise_sigma: float, seed: int, contrast: float = 1.0
) -> LabeledDataset:
    """Grayscale shapes, one family per class, class-major order. A pure
    function of its arguments. contrast scales the clean image before noise;
    small values pack the classes closer together."""
    check(class_count >= 2, INVALID_ARGUMENT, f"class_count {class_count} < 2")
    check(side >= 8, INVALID_ARGUMENT, f"side {side} < 8")
    check(noise_sigma >= 0, INVALID_ARGUMENT, f"noise_sigma {noise_sigma} < 0")
    check(0 < contrast <= 1, INVALID_ARGUMENT, f"contrast {contrast} outside (0, 1]")
    check(per_class >= 1, INVALID_ARGUMENT, f"per_class {per_class} < 1")
    if class_count > len(SHAPE_FAMILIES):
        raise PurikitError.fromPair(
            TOO_MANY_CLASSES, f"{class_count} requested, {len(SHAPE_FAMILIES)} available"
        )

    rng = np.random.default_rng(seed)
    images = np.empty((class_count * per_class, side, side, 1), dtype=np.float64)
    labels = np.repeat(np.arange(class_count, dtype=np.int64), per_class)
    for idx, label in enumerate(labels):
        mask = _shape_mask(SHAPE_FAMILIES[label], side, rng)
        background = rng.uniform(0.0, 0.15)
        foreground = rng.uniform(0.75, 1.0)
        img = contrast * (background + (foreground - background) * mask)
        if noise_sigma > 0:
            img = img + rng.normal(0.0, noise_sigma, size=img.shape)
        images[idx, :, :, 0] = np.clip(img, 0.0, 1.0)

    logger.debug("generated %d synthetic images, side %d, seed %d", len(labels), side, seed)
    return LabeledDataset(images, labels, class_count)


def load_cifar10_binary(path: str, limit: int = 0) -> LabeledDataset:
    """Reads CIFAR-10 binary records (1 label byte + 3072 channel-planar pixel
    bytes). limit = 0 reads every record."""
    if not os.path.exists(path):
        raise PurikitError.fromPair(MISSING_ARTIFACT, f"CIFAR-10 file {path}")
    with open(path, "rb") as fh:
        buf = fh.read()

    full = len(buf) // CIFAR_RECORD_SIZE
    if len(buf) % CIFAR_RECORD_SIZE != 0:
        raise PurikitError.fromPair(CIFAR_TRUNCATED, f"{full * CIFAR_RECORD_SIZE} in {path}")
    if limit:
        full = min(full, limit)

    records = np.frombuffer(buf, dtype=np.uint8, count=full * CIFAR_RECORD_SIZE)
    records = records.reshape(full, CIFAR_RECORD_SIZE)
    labels = records[:, 0].astype(np.int64)
    if full and labels.max() >= CIFAR_CLASS_COUNT:
        bad = int(np.argmax(labels >= CIFAR_CLASS_COUNT))
        raise PurikitError.fromPair(
            BAD_IMAGE, f"label {labels[bad]} at byte offset {bad * CIFAR_RECORD_SIZE}"
        )
    planes = records[:, 1:].reshape(full, CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE)
    images = planes.transpose(0, 2, 3, 1).astype(np.float64) / 255.0
    logger.info("loaded %d CIFAR-10 records from %s", full, path)
    return LabeledDataset(images, labels, CIFAR_CLASS_COUNT)


def split_dataset(dataset: LabeledDataset, test_fraction: float, seed: int) -> tuple:
    """Stratified split; every class keeps at least one training sample."""
    check(0.0 < test_fraction < 1.0, INVALID_ARGUMENT, f"test_fraction {test_fraction}")
    rng = np.random.default_rng(seed)
    trainIds = []
    testIds = []
    for label in range(dataset.class_count):
        ids = np.flatnonzero(dataset.labels == label)
        if len(ids) == 0:
            continue
        ids = rng.permutation(ids)
        nTest = min(int(round(len(ids) * test_fraction)), len(ids) - 1)
        testIds.extend(ids[:nTest])
        trainIds.extend(ids[nTest:])
    return (dataset.subset(np.sort(trainIds)), dataset.subset(np.sort(testIds)))


def save_bundle(bundle: ArtifactBundle, path: str):
    data = encode_bundle(bundle)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    logger.debug("saved bundle %s (%d bytes)", path, len(data))


def load_bundle(path: str) -> ArtifactBundle:
    with open(path, "rb") as fh:
        buf = fh.read()
    bundle = decode_bundle(buf)
    logger.debug("loaded bundle %s: %s", path, bundle)
    return bundle


def dataset_to_bundle(dataset: LabeledDataset, manifest: dict = None) -> ArtifactBundle:
    meta = {"kind": "dataset", "class_count": dataset.class_count, "samples": len(dataset)}
    if manifest:
        meta.update(manifest)
    return ArtifactBundle(meta, {"images": dataset.images, "labels": dataset.labels})


def dataset_from_bundle(bundle: ArtifactBundle) -> LabeledDataset:
    check(
        bundle.manifest.get("kind") == "dataset",
        INVALID_ARGUMENT,
        f"expected a dataset bundle, got '{bundle.manifest.get('kind')}'",
    )
    return LabeledDataset(
        bundle.arrays["images"], bundle.arrays["labels"], int(bundle.manifest["class_count"])
    )
