"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

A small convolutional classifier with hand-written backpropagation.

    conv 3x3 (8) -> ReLU -> max-pool 2x2 -> conv 3x3 (16) -> ReLU
    -> global average pool (latent, k = 16) -> affine -> logits

Tensors are channels-last (N x H x W x C) and double precision. Convolutions
use zero "same" padding. Inputs are first standardized per channel with a shift
and scale frozen from the training images; they are not trained.
"""

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp

from purikit.bundle import ArtifactBundle
from purikit.cluster import cluster_lookup, mahalanobis
from purikit.common import LatentBatch
from purikit.const import (
    LATENT_DIM,
    CONV1_FILTERS,
    CONV2_FILTERS,
    KERNEL_SIDE,
    MOMENTUM,
    MD_GRAD_FLOOR,
    INPUT_SCALE_FLOOR,
)
from purikit.errors import INVALID_ARGUMENT, SHAPE_MISMATCH, MISSING_CLUSTER, EMPTY_INPUT
from purikit.object_implem import Object
from purikit.utils import PurikitError, LogFunction, check, floatMaxString
from purikit.wrapper import PipelineWrapper

logger = logging.getLogger(__name__)

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b")
ARCHITECTURE = "conv3x3x8-relu-maxpool2-conv3x3x16-relu-gap-fc"
EVAL_CHUNK = 256


class NetworkParams(Object):
    """The trainable arrays plus the frozen input standardization. arrays
    may carry input_shift and input_scale; they default to 0 and 1."""

    def __init__(self, arrays: dict):
        missing = [name for name in PARAM_NAMES if name not in arrays]
        check(not missing, SHAPE_MISMATCH, f"missing parameter arrays {missing}")
        self.arrays = {name: np.asarray(arrays[name], dtype=np.float64) for name in PARAM_NAMES}
        self.in_channels = self.arrays["conv1_w"].shape[2]
        self.class_count = self.arrays["fc_w"].shape[1]
        self.input_shift = np.asarray(arrays.get("input_shift", np.zeros(self.in_channels)), dtype=np.float64)
        self.input_scale = np.asarray(arrays.get("input_scale", np.ones(self.in_channels)), dtype=np.float64)
        check(
            self.input_shift.shape == (self.in_channels,) and self.input_scale.shape == (self.in_channels,),
            SHAPE_MISMATCH,
            f"input standardization {self.input_shift.shape} / {self.input_scale.shape} "
            f"for {self.in_channels} channel(s)",
        )
        check(np.all(self.input_scale > 0), INVALID_ARGUMENT, "input_scale must be positive")

    def __getitem__(self, name):
        return self.arrays[name]

    def items(self):
        return self.arrays.items()

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.allArrays())

    def allArrays(self) -> dict:
        """trainable and standardization arrays, copied"""
        out = {name: arr.copy() for name, arr in self.arrays.items()}
        out["input_shift"] = self.input_shift.copy()
        out["input_scale"] = self.input_scale.copy()
        return out

    def standardize(self, images) -> "NetworkParams":
        """freezes the per-channel mean and standard deviation of images as the
        input shift and scale; a constant channel keeps scale 1"""
        images = np.asarray(images, dtype=np.float64)
        self.input_shift = images.mean(axis=(0, 1, 2))
        spread = images.std(axis=(0, 1, 2))
        self.input_scale = np.where(spread > INPUT_SCALE_FLOOR, spread, 1.0)
        return self

    def squaredNorm(self) -> float:
        return float(sum((arr ** 2).sum() for arr in self.arrays.values()))

    def __str__(self):
        return "NetworkParams in: %d, classes: %d, latent: %d" % (
            self.in_channels, self.class_count, LATENT_DIM)


class TrainConfig(Object):
    def __init__(
        self,
        epochs: int = 20,
        batch_size: int = 32,
        learning_rate: float = 0.05,
        weight_decay: float = 1e-4,
        seed: int = 0,
    ):
        check(epochs >= 1, INVALID_ARGUMENT, f"epochs {epochs}")
        check(batch_size >= 1, INVALID_ARGUMENT, f"batch_size {batch_size}")
        check(learning_rate >= 0, INVALID_ARGUMENT, f"learning_rate {learning_rate}")
        check(weight_decay >= 0, INVALID_ARGUMENT, f"weight_decay {weight_decay}")
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.learning_rate = float(learning_rate)
        self.weight_decay = float(weight_decay)
        self.seed = int(seed)

    def __str__(self):
        return "epochs: %d, batch: %d, lr: %s, wd: %s, seed: %d" % (
            self.epochs, self.batch_size, self.learning_rate, self.weight_decay, self.seed)


class RobustTrainConfig(TrainConfig):
    def __init__(self, alpha: float = 0.1, inner_attack=None, init: str = "baseline", **kwargs):
        super().__init__(**kwargs)
        check(alpha >= 0, INVALID_ARGUMENT, f"alpha {alpha} < 0")
        check(init in ("random", "baseline"), INVALID_ARGUMENT, f"init '{init}'")
        if inner_attack is None:
            from purikit.attack import AttackConfig, AttackMethod
            inner_attack = AttackConfig(AttackMethod.PGD, seed=self.seed)
        self.alpha = float(alpha)
        self.inner_attack = inner_attack
        self.init = init

    def __str__(self):
        return "%s, alpha: %s, init: %s, inner: %s" % (
            super().__str__(), self.alpha, self.init, self.inner_attack)


class MdTerm(Object):
    """alpha and one ClusterDistribution per batch sample"""

    def __init__(self, alpha: float, distributions):
        self.alpha = float(alpha)
        self.distributions = list(distributions)


def init_params(in_channels: int, class_count: int, seed) -> NetworkParams:
    """He-normal weights, zero biases"""
    rng = np.random.default_rng(seed)
    k = KERNEL_SIDE
    return NetworkParams({
        "conv1_w": rng.normal(0.0, np.sqrt(2.0 / (k * k * in_channels)), (k, k, in_channels, CONV1_FILTERS)),
        "conv1_b": np.zeros(CONV1_FILTERS),
        "conv2_w": rng.normal(0.0, np.sqrt(2.0 / (k * k * CONV1_FILTERS)), (k, k, CONV1_FILTERS, CONV2_FILTERS)),
        "conv2_b": np.zeros(CONV2_FILTERS),
        "fc_w": rng.normal(0.0, np.sqrt(2.0 / LATENT_DIM), (LATENT_DIM, class_count)),
        "fc_b": np.zeros(class_count),
    })


def _conv_forward(x, w, b) -> tuple:
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    windows = sliding_window_view(padded, (KERNEL_SIDE, KERNEL_SIDE), axis=(1, 2))
    return (np.einsum("nhwcij,ijco->nhwo", windows, w, optimize=True) + b, windows)


def _conv_backward(dout, windows, w, inputShape, needInput: bool = True) -> tuple:
    dw = np.einsum("nhwcij,nhwo->ijco", windows, dout, optimize=True)
    db = dout.sum(axis=(0, 1, 2))
    if not needInput:
        return (None, dw, db)
    (count, height, width, channels) = inputShape
    dpadded = np.zeros((count, height + 2, width + 2, channels))
    for i in range(KERNEL_SIDE):
        for j in range(KERNEL_SIDE):
            dpadded[:, i:i + height, j:j + width, :] += dout @ w[i, j].T
    return (dpadded[:, 1:-1, 1:-1, :], dw, db)


def _pool_forward(a) -> tuple:
    (count, height, width, channels) = a.shape
    (h2, w2) = (height // 2, width // 2)
    blocks = a[:, :2 * h2, :2 * w2, :].reshape(count, h2, 2, w2, 2, channels)
    blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(count, h2, w2, channels, 4)
    # first maximum wins on ties
    winners = np.argmax(blocks, axis=-1)
    return (np.take_along_axis(blocks, winners[..., np.newaxis], axis=-1)[..., 0], winners)


def _pool_backward(dout, winners, inputShape) -> np.ndarray:
    (count, h2, w2, channels) = dout.shape
    routed = (np.arange(4) == winners[..., np.newaxis]) * dout[..., np.newaxis]
    routed = routed.reshape(count, h2, w2, channels, 2, 2).transpose(0, 1, 4, 2, 5, 3)
    full = np.zeros(inputShape)
    full[:, :2 * h2, :2 * w2, :] = routed.reshape(count, 2 * h2, 2 * w2, channels)
    return full


def _as_batch(params: NetworkParams, x) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[np.newaxis]
    check(x.ndim == 4, SHAPE_MISMATCH, f"input must be N x H x W x C, got {x.shape}")
    check(
        x.shape[3] == params.in_channels,
        SHAPE_MISMATCH,
        f"input has {x.shape[3]} channels, network expects {params.in_channels}",
    )
    check(min(x.shape[1], x.shape[2]) >= 2, SHAPE_MISMATCH, f"input {x.shape[1:3]} below 2x2")
    return (x, single)


def _forward(params: NetworkParams, x) -> tuple:
    x = (x - params.input_shift) / params.input_scale
    (z1, win1) = _conv_forward(x, params["conv1_w"], params["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    (p1, winners) = _pool_forward(a1)
    (z2, win2) = _conv_forward(p1, params["conv2_w"], params["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    latent = a2.mean(axis=(1, 2))
    logits = latent @ params["fc_w"] + params["fc_b"]
    cache = {
        "x_shape": x.shape, "win1": win1, "z1": z1, "a1_shape": a1.shape, "winners": winners,
        "p1_shape": p1.shape, "win2": win2, "z2": z2, "latent": latent,
    }
    return (logits, latent, cache)


def forward(params: NetworkParams, x) -> tuple:
    """Returns (logits, latent, cache). A single H x W x C image gives
    vectors, a stack gives one row per image."""
    (batch, single) = _as_batch(params, x)
    (logits, latent, cache) = _forward(params, batch)
    if single:
        return (logits[0], latent[0], cache)
    return (logits, latent, cache)


def _backward(params: NetworkParams, cache: dict, dlogits, dlatentExtra=None, needInput=False) -> tuple:
    grads = {}
    latent = cache["latent"]
    grads["fc_w"] = latent.T @ dlogits
    grads["fc_b"] = dlogits.sum(axis=0)
    dlatent = dlogits @ params["fc_w"].T
    if dlatentExtra is not None:
        dlatent = dlatent + dlatentExtra

    z2 = cache["z2"]
    area = z2.shape[1] * z2.shape[2]
    dz2 = np.broadcast_to(dlatent[:, np.newaxis, np.newaxis, :] / area, z2.shape) * (z2 > 0)
    (dp1, grads["conv2_w"], grads["conv2_b"]) = _conv_backward(
        dz2, cache["win2"], params["conv2_w"], cache["p1_shape"])
    da1 = _pool_backward(dp1, cache["winners"], cache["a1_shape"])
    dz1 = da1 * (cache["z1"] > 0)
    (dx, grads["conv1_w"], grads["conv1_b"]) = _conv_backward(
        dz1, cache["win1"], params["conv1_w"], cache["x_shape"], needInput)
    if dx is not None:
        dx = dx / params.input_scale
    return (grads, dx)


def _cross_entropy(logits, labels) -> tuple:
    """per-sample losses and d(sum of losses)/d(logits)"""
    logProbs = logits - logsumexp(logits, axis=1, keepdims=True)
    rows = np.arange(len(labels))
    losses = -logProbs[rows, labels]
    dlogits = np.exp(logProbs)
    dlogits[rows, labels] -= 1.0
    return (losses, dlogits)


def _check_labels(params: NetworkParams, labels, count: int) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    check(len(labels) == count, SHAPE_MISMATCH, f"{count} inputs but {len(labels)} labels")
    check(
        labels.min() >= 0 and labels.max() < params.class_count,
        INVALID_ARGUMENT,
        f"labels outside [0, {params.class_count})",
    )
    return labels


def _md_terms(latent, md_term: MdTerm) -> tuple:
    """per-sample distances and d(sum of distances)/d(latent)"""
    check(
        len(md_term.distributions) == len(latent),
        SHAPE_MISMATCH,
        f"{len(latent)} samples but {len(md_term.distributions)} distributions",
    )
    distances = np.zeros(len(latent))
    dlatent = np.zeros_like(latent)
    for idx, dist in enumerate(md_term.distributions):
        if dist is None:
            raise PurikitError.fromPair(MISSING_CLUSTER, f"batch position {idx}")
        distances[idx] = mahalanobis(latent[idx], dist)
        if distances[idx] >= MD_GRAD_FLOOR:
            dlatent[idx] = dist.inverse @ (latent[idx] - dist.mean) / distances[idx]
    return (distances, dlatent)


def _loss_and_grads(params, batch, labels, weight_decay, md_term=None) -> tuple:
    (logits, latent, cache) = _forward(params, batch)
    count = len(batch)
    (losses, dlogits) = _cross_entropy(logits, labels)
    loss = losses.mean() + weight_decay * params.squaredNorm()

    info = {"correct": int((np.argmax(logits, axis=1) == labels).sum()), "md": None}
    dlatentExtra = None
    if md_term is not None:
        (distances, dmd) = _md_terms(latent, md_term)
        info["md"] = distances
        if md_term.alpha != 0.0:
            loss = loss + md_term.alpha * distances.mean()
            dlatentExtra = md_term.alpha * dmd / count

    (grads, _) = _backward(params, cache, dlogits / count, dlatentExtra)
    if weight_decay != 0.0:
        for name in PARAM_NAMES:
            grads[name] = grads[name] + 2.0 * weight_decay * params[name]
    return (float(loss), NetworkParams(grads), info)


def loss_and_grads(params: NetworkParams, batch, labels, weight_decay: float, md_term: MdTerm = None) -> tuple:
    """Mean softmax cross-entropy + weight_decay * |theta|^2, plus
    alpha * mean Mahalanobis distance of the latents when md_term is given.
    Returns (loss, gradients as NetworkParams)."""
    (batch, _) = _as_batch(params, batch)
    labels = _check_labels(params, labels, len(batch))
    (loss, grads, _) = _loss_and_grads(params, batch, labels, weight_decay, md_term)
    return (loss, grads)


def input_gradient(params: NetworkParams, x, y) -> np.ndarray:
    """d cross-entropy / dx for every sample, shaped like x"""
    (batch, single) = _as_batch(params, x)
    labels = _check_labels(params, y, len(batch))
    (logits, _, cache) = _forward(params, batch)
    (_, dlogits) = _cross_entropy(logits, labels)
    (_, dx) = _backward(params, cache, dlogits, needInput=True)
    return dx[0] if single else dx


def sample_losses(params: NetworkParams, x, y) -> np.ndarray:
    (batch, _) = _as_batch(params, x)
    labels = _check_labels(params, y, len(batch))
    (logits, _, _) = _forward(params, batch)
    return _cross_entropy(logits, labels)[0]


def latents(params: NetworkParams, images) -> LatentBatch:
    (batch, _) = _as_batch(params, images)
    return np.concatenate([
        _forward(params, batch[start:start + EVAL_CHUNK])[1]
        for start in range(0, len(batch), EVAL_CHUNK)
    ])


def predict(params: NetworkParams, images) -> np.ndarray:
    (batch, _) = _as_batch(params, images)
    if len(batch) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([
        np.argmax(_forward(params, batch[start:start + EVAL_CHUNK])[0], axis=1)
        for start in range(0, len(batch), EVAL_CHUNK)
    ])


def accuracy(params: NetworkParams, images, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return 0.0
    return float(np.mean(predict(params, images) == labels))


def _sgd_step(params: NetworkParams, velocity: dict, grads: NetworkParams, lr: float):
    for name in PARAM_NAMES:
        velocity[name] = MOMENTUM * velocity[name] - lr * grads[name]
        params.arrays[name] = params.arrays[name] + velocity[name]


def _start_params(dataset, cfg, init: NetworkParams = None) -> NetworkParams:
    if init is not None:
        check(
            init.in_channels == dataset.images.shape[3] and init.class_count == dataset.class_count,
            SHAPE_MISMATCH,
            "initial parameters do not fit the dataset",
        )
        return init.copy()
    params = init_params(dataset.images.shape[3], dataset.class_count, [cfg.seed, 0])
    return params.standardize(dataset.images)


@LogFunction("training", logging.DEBUG)
def train_baseline(dataset, cfg: TrainConfig, wrapper: PipelineWrapper = None, init: NetworkParams = None) -> tuple:
    """Mini-batch SGD with momentum on the plain objective. Returns (params,
    per-epoch history)."""
    check(len(dataset) > 0, EMPTY_INPUT, "empty training set")
    params = _start_params(dataset, cfg, init)
    shuffle = np.random.default_rng([cfg.seed, 1])
    velocity = {name: np.zeros_like(arr) for name, arr in params.items()}
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle.permutation(len(dataset))
        (total, correct) = (0.0, 0)
        for start in range(0, len(order), cfg.batch_size):
            ids = order[start:start + cfg.batch_size]
            (loss, grads, info) = _loss_and_grads(
                params, dataset.images[ids], dataset.labels[ids], cfg.weight_decay)
            _sgd_step(params, velocity, grads, cfg.learning_rate)
            total += loss * len(ids)
            correct += info["correct"]
        record = {"epoch": epoch, "loss": total / len(order), "accuracy": correct / len(order)}
        history.append(record)
        logger.debug("baseline epoch %d loss %s", epoch, floatMaxString(record["loss"], 6))
        if wrapper is not None:
            wrapper.epochEnd("baseline", epoch, record["loss"], record["accuracy"])
    return (params, history)


def _inner_seed(seed: int, epoch: int, batch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, batch]).generate_state(1)[0])


@LogFunction("training", logging.DEBUG)
def train_robust(
    dataset, phi, cfg: RobustTrainConfig, wrapper: PipelineWrapper = None, init: NetworkParams = None
) -> tuple:
    """Adversarial training: each batch is replaced by its PGD counterpart and
    the loss gains alpha * mean Mahalanobis distance of the adversarial
    latents to the cluster recorded for the clean sample. Returns (params,
    per-epoch history with the mean distance)."""
    from purikit.attack import pgd

    check(len(dataset) > 0, EMPTY_INPUT, "empty training set")
    lookup = cluster_lookup(phi)
    missing = [idx for idx in range(len(dataset)) if idx not in lookup]
    if missing:
        raise PurikitError.fromPair(
            MISSING_CLUSTER, f"{len(missing)} sample(s), first is {missing[0]}")

    params = _start_params(dataset, cfg, init)
    shuffle = np.random.default_rng([cfg.seed, 1])
    velocity = {name: np.zeros_like(arr) for name, arr in params.items()}
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle.permutation(len(dataset))
        (total, correct, mdSum) = (0.0, 0, 0.0)
        for (batchIndex, start) in enumerate(range(0, len(order), cfg.batch_size)):
            ids = order[start:start + cfg.batch_size]
            labels = dataset.labels[ids]
            inner = cfg.inner_attack.withSeed(_inner_seed(cfg.inner_attack.seed, epoch, batchIndex))
            adversarial = pgd(params, dataset.images[ids], labels, inner)
            term = MdTerm(cfg.alpha, [lookup[int(idx)] for idx in ids])
            (loss, grads, info) = _loss_and_grads(params, adversarial, labels, cfg.weight_decay, term)
            _sgd_step(params, velocity, grads, cfg.learning_rate)
            total += loss * len(ids)
            correct += info["correct"]
            mdSum += float(info["md"].sum())
        record = {
            "epoch": epoch,
            "loss": total / len(order),
            "accuracy": correct / len(order),
            "mean_md": mdSum / len(order),
        }
        history.append(record)
        logger.debug("robust epoch %d loss %s mean md %s", epoch,
                     floatMaxString(record["loss"], 6), floatMaxString(record["mean_md"], 6))
        if wrapper is not None:
            wrapper.epochEnd("robust", epoch, record["loss"], record["accuracy"], record["mean_md"])
    return (params, history)


def params_to_bundle(params: NetworkParams, manifest: dict = None) -> ArtifactBundle:
    meta = {
        "kind": "network",
        "architecture": ARCHITECTURE,
        "in_channels": params.in_channels,
        "class_count": params.class_count,
        "latent_dim": LATENT_DIM,
    }
    if manifest:
        meta.update(manifest)
    return ArtifactBundle(meta, params.allArrays())


def params_from_bundle(bundle: ArtifactBundle) -> NetworkParams:
    check(
        bundle.manifest.get("kind") == "network",
        INVALID_ARGUMENT,
        f"expected a network bundle, got '{bundle.manifest.get('kind')}'",
    )
    check(
        bundle.manifest.get("architecture") == ARCHITECTURE,
        SHAPE_MISMATCH,
        f"architecture '{bundle.manifest.get('architecture')}'",
    )
    return NetworkParams(bundle.arrays)
