"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Gradient attacks under l2 and l-infinity budgets. FGSM is a single BIM step of
size epsilon; PGD is BIM from a random point of the epsilon ball. Every step is
projected back onto the ball around the clean input and then onto [0, 1].
BIM steps default to epsilon / 10; PGD steps to 2.5 epsilon / steps, long enough
for the path from a random start to cross the ball.
"""

import logging
from enum import Enum

import numpy as np

from purikit import net
from purikit.const import PGD_DEFAULT_EPSILON, PGD_DEFAULT_STEPS, PGD_STEP_FACTOR, BIM_DEFAULT_STEPS, STEP_SIZE_FRACTION
from purikit.errors import INVALID_ARGUMENT
from purikit.object_implem import Object
from purikit.utils import check, getEnumTypeFromString

logger = logging.getLogger(__name__)


class AttackMethod(Enum):
    FGSM = ("fgsm", "FGSM")
    BIM = ("bim", "BIM")
    PGD = ("pgd", "PGD")


class NormKind(Enum):
    L2 = ("l2", "l2")
    LINF = ("linf", "linf")


DEFAULT_STEPS = {
    AttackMethod.FGSM: 1,
    AttackMethod.BIM: BIM_DEFAULT_STEPS,
    AttackMethod.PGD: PGD_DEFAULT_STEPS,
}


class AttackConfig(Object):
    def __init__(
        self,
        method=AttackMethod.PGD,
        norm=NormKind.L2,
        epsilon: float = PGD_DEFAULT_EPSILON,
        steps: int = None,
        step_size: float = None,
        seed: int = 0,
    ):
        if isinstance(method, str):
            method = getEnumTypeFromString(AttackMethod, method)
        if isinstance(norm, str):
            norm = getEnumTypeFromString(NormKind, norm)
        check(epsilon >= 0, INVALID_ARGUMENT, f"epsilon {epsilon} < 0")
        if method == AttackMethod.FGSM:
            steps = 1
        elif steps is None:
            steps = DEFAULT_STEPS[method]
        check(steps >= 1, INVALID_ARGUMENT, f"steps {steps} < 1")
        check(step_size is None or step_size > 0, INVALID_ARGUMENT, f"step_size {step_size}")
        self.method = method
        self.norm = norm
        self.epsilon = float(epsilon)
        self.steps = int(steps)
        self.step_size = None if step_size is None else float(step_size)
        self.seed = int(seed)

    def stepSize(self) -> float:
        if self.method == AttackMethod.FGSM:
            return self.epsilon
        if self.step_size is not None:
            return self.step_size
        if self.method == AttackMethod.PGD:
            return PGD_STEP_FACTOR * self.epsilon / self.steps
        return STEP_SIZE_FRACTION * self.epsilon

    def withSeed(self, seed: int) -> "AttackConfig":
        return AttackConfig(self.method, self.norm, self.epsilon, self.steps, self.step_size, seed)

    def label(self) -> str:
        text = f"{self.method.value[0]}-{self.norm.value[0]}-eps{self.epsilon:g}"
        if self.method != AttackMethod.FGSM:
            text += f"-steps{self.steps}"
        return text

    def toDict(self) -> dict:
        return {
            "method": self.method.value[0],
            "norm": self.norm.value[0],
            "epsilon": self.epsilon,
            "steps": self.steps,
            "step_size": self.stepSize(),
            "seed": self.seed,
        }

    def __str__(self):
        return "%s %s eps: %s steps: %d step: %s seed: %d" % (
            self.method.value[1], self.norm.value[1], self.epsilon, self.steps,
            self.stepSize(), self.seed)


def _per_sample_norm(v: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, v.ndim))
    return np.sqrt((v ** 2).sum(axis=axes, keepdims=True))


def _direction(g: np.ndarray, norm: NormKind) -> np.ndarray:
    if norm == NormKind.LINF:
        return np.sign(g)
    length = _per_sample_norm(g)
    return np.divide(g, length, out=np.zeros_like(g), where=length > 0)


def _project(x0: np.ndarray, x: np.ndarray, epsilon: float, norm: NormKind) -> np.ndarray:
    delta = x - x0
    if norm == NormKind.LINF:
        delta = np.clip(delta, -epsilon, epsilon)
    else:
        length = _per_sample_norm(delta)
        scale = np.where(length > epsilon, epsilon / np.maximum(length, 1e-300), 1.0)
        delta = delta * scale
    return np.clip(x0 + delta, 0.0, 1.0)


def _gradient_fn(params, gradient):
    if gradient is not None:
        return gradient
    return lambda x, y: net.input_gradient(params, x, y)


def _as_batch(x, y) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[np.newaxis]
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    return (x, y, single)


def _iterate(params, x0, start, y, cfg: AttackConfig, gradient) -> np.ndarray:
    grad = _gradient_fn(params, gradient)
    step = cfg.stepSize()
    x = start
    for _ in range(cfg.steps):
        x = _project(x0, x + step * _direction(grad(x, y), cfg.norm), cfg.epsilon, cfg.norm)
    return x


def fgsm(params, x, y, cfg: AttackConfig, gradient=None) -> np.ndarray:
    """one step of size epsilon along sign(g) (linf) or g / |g| (l2)"""
    check(cfg.method == AttackMethod.FGSM, INVALID_ARGUMENT, f"fgsm called with {cfg.method}")
    (batch, labels, single) = _as_batch(x, y)
    out = _iterate(params, batch, batch, labels, cfg, gradient)
    return out[0] if single else out


def bim(params, x, y, cfg: AttackConfig, gradient=None) -> np.ndarray:
    (batch, labels, single) = _as_batch(x, y)
    out = _iterate(params, batch, batch, labels, cfg, gradient)
    return out[0] if single else out


def random_start(x0: np.ndarray, epsilon: float, norm: NormKind, rng) -> np.ndarray:
    """a uniform point of the epsilon ball around every sample, clipped to [0, 1]"""
    if norm == NormKind.LINF:
        delta = rng.uniform(-epsilon, epsilon, size=x0.shape)
    else:
        dims = int(np.prod(x0.shape[1:]))
        direction = rng.standard_normal(x0.shape)
        direction = _direction(direction, NormKind.L2)
        radius = epsilon * rng.uniform(0.0, 1.0, size=(len(x0),) + (1,) * (x0.ndim - 1)) ** (1.0 / dims)
        delta = direction * radius
    return np.clip(x0 + delta, 0.0, 1.0)


def pgd(params, x, y, cfg: AttackConfig, gradient=None) -> np.ndarray:
    (batch, labels, single) = _as_batch(x, y)
    rng = np.random.default_rng(cfg.seed)
    start = random_start(batch, cfg.epsilon, cfg.norm, rng)
    out = _iterate(params, batch, start, labels, cfg, gradient)
    return out[0] if single else out


ATTACKS = {
    AttackMethod.FGSM: fgsm,
    AttackMethod.BIM: bim,
    AttackMethod.PGD: pgd,
}


def run_attack(params, x, y, cfg: AttackConfig, gradient=None) -> np.ndarray:
    logger.debug("run_attack: %s on %d sample(s)", cfg, len(np.atleast_1d(y)))
    return ATTACKS[cfg.method](params, x, y, cfg, gradient)


def displacement_norm(x0, x, norm: NormKind) -> np.ndarray:
    delta = np.asarray(x, dtype=np.float64) - np.asarray(x0, dtype=np.float64)
    if delta.ndim == 3:
        delta = delta[np.newaxis]
    flat = delta.reshape(len(delta), -1)
    if norm == NormKind.LINF:
        return np.abs(flat).max(axis=1)
    return np.sqrt((flat ** 2).sum(axis=1))
