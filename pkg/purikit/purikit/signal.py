"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Frequency-domain helpers. Every boundary is circular, so convolutions and the
Tikhonov smoother are diagonal after a 2-D FFT.
"""

import logging

import numpy as np
import scipy.fft

from purikit.const import DEFAULT_TIKHONOV_LAMBDA
from purikit.errors import INVALID_ARGUMENT, SHAPE_MISMATCH
from purikit.object_implem import Object
from purikit.tensorio import as_image
from purikit.utils import check

logger = logging.getLogger(__name__)


class FrequencyPlan(Object):
    """FFT workspace for one spatial size. Spatial axes are the two given
    axes; not shared between threads."""

    def __init__(self, height: int, width: int, workers: int = 1):
        check(height >= 1 and width >= 1, INVALID_ARGUMENT, f"plan size {height}x{width}")
        self.height = height
        self.width = width
        self.workers = workers
        self._responses = {}
        wy = 2.0 * np.pi * np.arange(height) / height
        wx = 2.0 * np.pi * np.arange(width) / width
        # |G_y(w)|^2 + |G_x(w)|^2 for the wraparound forward difference
        self.gradientPower = (
            4.0 * np.sin(wy / 2.0)[:, np.newaxis] ** 2 + 4.0 * np.sin(wx / 2.0)[np.newaxis, :] ** 2
        )

    def forward(self, x: np.ndarray, axes=(0, 1)) -> np.ndarray:
        return scipy.fft.fft2(x, axes=axes, workers=self.workers)

    def inverse(self, xf: np.ndarray, axes=(0, 1)) -> np.ndarray:
        return scipy.fft.ifft2(xf, axes=axes, workers=self.workers).real

    def pad(self, kernel: np.ndarray, axes=(0, 1)) -> np.ndarray:
        """zero-pads kernel to the plan size with its origin at (0, 0)"""
        (ay, ax) = axes
        shape = list(kernel.shape)
        shape[ay] = self.height
        shape[ax] = self.width
        out = np.zeros(shape, dtype=kernel.dtype)
        index = [slice(None)] * kernel.ndim
        index[ay] = slice(0, kernel.shape[ay])
        index[ax] = slice(0, kernel.shape[ax])
        out[tuple(index)] = kernel
        return out

    def tikhonovResponse(self, lambdaLow: float) -> np.ndarray:
        if lambdaLow not in self._responses:
            self._responses[lambdaLow] = 1.0 / (1.0 + lambdaLow * self.gradientPower)
        return self._responses[lambdaLow]

    def __str__(self):
        return "FrequencyPlan %dx%d workers: %d" % (self.height, self.width, self.workers)


class TikhonovConfig(Object):
    def __init__(self, lambda_low: float = DEFAULT_TIKHONOV_LAMBDA, boundary: str = "circular"):
        check(lambda_low >= 0, INVALID_ARGUMENT, f"lambda_low {lambda_low} < 0")
        check(boundary == "circular", INVALID_ARGUMENT, f"boundary '{boundary}'")
        self.lambda_low = float(lambda_low)
        self.boundary = boundary

    def __str__(self):
        return "lambda_low: %s, boundary: %s" % (self.lambda_low, self.boundary)


def circular_convolve(a: np.ndarray, kernel: np.ndarray, plan: FrequencyPlan = None) -> np.ndarray:
    """periodic convolution with the kernel origin at (0, 0)"""
    a = np.asarray(a, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    check(a.ndim == 2 and kernel.ndim == 2, SHAPE_MISMATCH, "circular_convolve takes 2-D arrays")
    check(
        kernel.shape[0] <= a.shape[0] and kernel.shape[1] <= a.shape[1],
        SHAPE_MISMATCH,
        f"kernel {kernel.shape} larger than image {a.shape}",
    )
    if plan is None:
        plan = FrequencyPlan(*a.shape)
    return plan.inverse(plan.forward(a) * plan.forward(plan.pad(kernel)))


def circular_correlate(a: np.ndarray, kernel: np.ndarray, plan: FrequencyPlan = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    check(
        kernel.shape[0] <= a.shape[0] and kernel.shape[1] <= a.shape[1],
        SHAPE_MISMATCH,
        f"kernel {kernel.shape} larger than image {a.shape}",
    )
    if plan is None:
        plan = FrequencyPlan(*a.shape)
    return plan.inverse(plan.forward(a) * np.conj(plan.forward(plan.pad(kernel))))


def tikhonov_decompose(x, cfg: TikhonovConfig, plan: FrequencyPlan = None) -> tuple:
    """Splits x into (x_low, x_high). x_low minimizes
    1/2 |x_low - x|^2 + lambda/2 sum_j |G_j x_low|^2 per channel; x_high = x - x_low.
    Neither band is clamped."""
    x = as_image(x)
    if cfg.lambda_low == 0.0:
        return (x.copy(), np.zeros_like(x))
    (height, width, _) = x.shape
    if plan is None or (plan.height, plan.width) != (height, width):
        plan = FrequencyPlan(height, width)
    response = plan.tikhonovResponse(cfg.lambda_low)[:, :, np.newaxis]
    low = plan.inverse(plan.forward(x) * response)
    return (low, x - low)


def total_variation(x: np.ndarray) -> float:
    """anisotropic circular total variation summed over channels"""
    x = np.asarray(x, dtype=np.float64)
    return float(
        np.abs(np.roll(x, -1, axis=0) - x).sum() + np.abs(np.roll(x, -1, axis=1) - x).sum()
    )
