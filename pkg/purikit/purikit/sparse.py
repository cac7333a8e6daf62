"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

ADMM solvers for convolutional sparse coding (CBPDN) and convolutional
dictionary learning (CDL).

Layouts:
    atoms  M x f x f x C, origin at the top-left corner
    maps   M x H x W
    image  H x W x C
All atoms code every channel jointly.
"""

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from purikit.const import (
    ATOM_INIT_JITTER,
    ATOM_INIT_MAX_CORRELATION,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    DEFAULT_LAMBDA_L1,
    RHO_ADAPT_FACTOR,
    RHO_ADAPT_THRESHOLD,
)
from purikit.errors import INVALID_ARGUMENT, SHAPE_MISMATCH, EMPTY_INPUT, NOT_CONVERGED
from purikit.object_implem import Object
from purikit.signal import FrequencyPlan
from purikit.utils import check, floatMaxString
from purikit.wrapper import PipelineWrapper

logger = logging.getLogger(__name__)

class Dictionary(Object):
    def __init__(self, atoms, lambda_l1: float = None, seed: int = None, history=None):
        atoms = np.asarray(atoms, dtype=np.float64)
        if atoms.ndim == 3:
            atoms = atoms[..., np.newaxis]
        check(atoms.ndim == 4, SHAPE_MISMATCH, f"atoms must be M x f x f x C, got {atoms.shape}")
        check(atoms.shape[1] == atoms.shape[2], SHAPE_MISMATCH, f"atoms not square: {atoms.shape}")
        self.atoms = atoms
        self.atom_count = atoms.shape[0]
        self.filter_size = atoms.shape[1]
        self.channels = atoms.shape[3]
        self.lambda_l1 = lambda_l1
        self.seed = seed
        self.history = list(history) if history else []

    def norms(self) -> np.ndarray:
        return np.sqrt((self.atoms ** 2).sum(axis=(1, 2, 3)))

    def spectra(self, plan: FrequencyPlan) -> np.ndarray:
        """M x H x W x C atom transforms at the plan size"""
        return plan.forward(plan.pad(self.atoms, axes=(1, 2)), axes=(1, 2))

    def __str__(self):
        return "Dictionary M: %d, f: %d, C: %d, lambda: %s" % (
            self.atom_count, self.filter_size, self.channels, self.lambda_l1)


class CoefficientMaps(Object):
    def __init__(self, maps):
        self.maps = np.asarray(maps, dtype=np.float64)

    def sparsity(self, tol: float = 1e-8) -> float:
        """fraction of entries with magnitude at most tol"""
        if self.maps.size == 0:
            return 1.0
        return float(np.mean(np.abs(self.maps) <= tol))

    def __str__(self):
        return "CoefficientMaps %s sparsity: %s" % (self.maps.shape, floatMaxString(self.sparsity()))


class AdmmConfig(Object):
    def __init__(
        self,
        rho: float = None,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol_primal: float = DEFAULT_TOL,
        tol_dual: float = DEFAULT_TOL,
        rho_adapt: bool = True,
    ):
        check(rho is None or rho > 0, INVALID_ARGUMENT, f"rho {rho}")
        check(max_iters >= 1, INVALID_ARGUMENT, f"max_iters {max_iters}")
        check(tol_primal > 0 and tol_dual > 0, INVALID_ARGUMENT, "tolerances must be positive")
        self.rho = rho
        self.max_iters = int(max_iters)
        self.tol_primal = float(tol_primal)
        self.tol_dual = float(tol_dual)
        self.rho_adapt = bool(rho_adapt)

    def initialRho(self, lambda_l1: float) -> float:
        if self.rho is not None:
            return float(self.rho)
        return 10.0 * lambda_l1 + 0.1

    def __str__(self):
        return "rho: %s, max_iters: %d, tol: %s/%s, adapt: %s" % (
            self.rho, self.max_iters, self.tol_primal, self.tol_dual, self.rho_adapt)


class CbpdnConfig(Object):
    def __init__(self, lambda_l1: float = DEFAULT_LAMBDA_L1, admm: AdmmConfig = None):
        check(lambda_l1 >= 0, INVALID_ARGUMENT, f"lambda_l1 {lambda_l1} < 0")
        self.lambda_l1 = float(lambda_l1)
        self.admm = admm if admm is not None else AdmmConfig()

    def __str__(self):
        return "lambda_l1: %s, %s" % (self.lambda_l1, self.admm)


class AdmmDiagnostics(Object):
    def __init__(self):
        self.objective = []
        self.primal = []
        self.dual = []
        self.rho = []
        self.iterations = 0
        self.converged = False
        self.zero_fallback = False

    @property
    def flagged(self) -> bool:
        return not self.converged or self.zero_fallback

    def __str__(self):
        return "iterations: %d, converged: %s, zero_fallback: %s, objective: %s" % (
            self.iterations,
            self.converged,
            self.zero_fallback,
            floatMaxString(self.objective[-1] if self.objective else None, 6),
        )


def soft_threshold(v, kappa: float):
    check(kappa >= 0, INVALID_ARGUMENT, f"kappa {kappa} < 0")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def _stack(images) -> np.ndarray:
    if isinstance(images, np.ndarray) and images.ndim == 4:
        stack = images.astype(np.float64, copy=False)
    else:
        images = [np.asarray(img, dtype=np.float64) for img in images]
        check(len(images) > 0, EMPTY_INPUT, "no images")
        images = [img[..., np.newaxis] if img.ndim == 2 else img for img in images]
        shapes = {img.shape for img in images}
        check(len(shapes) == 1, SHAPE_MISMATCH, f"images differ in shape: {sorted(shapes)}")
        stack = np.stack(images)
    check(len(stack) > 0, EMPTY_INPUT, "no images")
    return stack


def _check_fit(dictionary: Dictionary, shape: tuple):
    (height, width, channels) = shape
    check(
        channels == dictionary.channels,
        SHAPE_MISMATCH,
        f"image has {channels} channels, atoms have {dictionary.channels}",
    )
    check(
        dictionary.filter_size <= min(height, width),
        SHAPE_MISMATCH,
        f"filter size {dictionary.filter_size} exceeds image {height}x{width}",
    )


def _synthesize(Df: np.ndarray, Yf: np.ndarray) -> np.ndarray:
    """sum_m d_m * y_m for a stack: Df M x H x W x C, Yf N x M x H x W"""
    return np.einsum("mhwc,nmhw->nhwc", Df, Yf)


def _adjoint(Df: np.ndarray, Sf: np.ndarray) -> np.ndarray:
    """channel-summed correlation with every atom: N x M x H x W"""
    return np.einsum("mhwc,nhwc->nmhw", np.conj(Df), Sf)


def _gram_inverse(Df: np.ndarray, rho: float) -> np.ndarray:
    # (rho I_C + A A^H)^-1 per frequency, A[c, m] = Df[m, c]
    gram = np.einsum("mhwc,mhwd->hwcd", Df, np.conj(Df))
    channels = Df.shape[3]
    return np.linalg.inv(gram + rho * np.eye(channels))


def _objectives(Df, Y, X, lambda_l1, plan) -> np.ndarray:
    residual = plan.inverse(_synthesize(Df, plan.forward(Y, axes=(2, 3))), axes=(1, 2)) - X
    return 0.5 * (residual ** 2).sum(axis=(1, 2, 3)) + lambda_l1 * np.abs(Y).sum(axis=(1, 2, 3))


def _admm_code(Df, X, lambda_l1, cfg: AdmmConfig, plan: FrequencyPlan, init=None):
    """Batched CBPDN: N images share one penalty schedule, every image keeps
    its own residual and objective trace."""
    (count, height, width, _) = X.shape
    atoms = Df.shape[0]
    rho = cfg.initialRho(lambda_l1)
    gramInv = _gram_inverse(Df, rho)
    AhX = _adjoint(Df, plan.forward(X, axes=(1, 2)))

    Y = np.zeros((count, atoms, height, width)) if init is None else np.array(init, dtype=np.float64)
    U = np.zeros_like(Y)
    diags = [AdmmDiagnostics() for _ in range(count)]
    primal = np.zeros(count)
    dual = np.zeros(count)

    for iteration in range(1, cfg.max_iters + 1):
        Bf = AhX + rho * plan.forward(Y - U, axes=(2, 3))
        T = np.einsum("hwcd,nhwd->nhwc", gramInv, _synthesize(Df, Bf))
        Rf = (Bf - _adjoint(Df, T)) / rho
        R = plan.inverse(Rf, axes=(2, 3))

        Yprev = Y
        Y = soft_threshold(R + U, lambda_l1 / rho)
        U = U + R - Y

        primal = np.sqrt(((R - Y) ** 2).sum(axis=(1, 2, 3)))
        dual = rho * np.sqrt(((Y - Yprev) ** 2).sum(axis=(1, 2, 3)))
        objective = _objectives(Df, Y, X, lambda_l1, plan)
        for idx, diag in enumerate(diags):
            diag.objective.append(float(objective[idx]))
            diag.primal.append(float(primal[idx]))
            diag.dual.append(float(dual[idx]))
            diag.rho.append(rho)
            diag.iterations = iteration

        if np.all(primal < cfg.tol_primal) and np.all(dual < cfg.tol_dual):
            break

        if cfg.rho_adapt:
            primalNorm = np.linalg.norm(primal)
            dualNorm = np.linalg.norm(dual)
            scale = 1.0
            if primalNorm > RHO_ADAPT_THRESHOLD * dualNorm:
                scale = RHO_ADAPT_FACTOR
            elif dualNorm > RHO_ADAPT_THRESHOLD * primalNorm:
                scale = 1.0 / RHO_ADAPT_FACTOR
            if scale != 1.0:
                rho *= scale
                U = U / scale
                gramInv = _gram_inverse(Df, rho)

    zeroObjective = 0.5 * (X ** 2).sum(axis=(1, 2, 3))
    finalObjective = _objectives(Df, Y, X, lambda_l1, plan)
    for idx, diag in enumerate(diags):
        diag.converged = bool(primal[idx] < cfg.tol_primal and dual[idx] < cfg.tol_dual)
        if finalObjective[idx] > zeroObjective[idx]:
            Y[idx] = 0.0
            diag.zero_fallback = True
            diag.converged = False
    return (Y, diags)


def cbpdn_batch(
    dictionary: Dictionary,
    images,
    lambda_l1: float,
    cfg: AdmmConfig,
    init=None,
    plan: FrequencyPlan = None,
    wrapper: PipelineWrapper = None,
) -> tuple:
    """CBPDN over a stack of same-shape images, returns (list of
    CoefficientMaps, list of AdmmDiagnostics)."""
    check(lambda_l1 >= 0, INVALID_ARGUMENT, f"lambda_l1 {lambda_l1} < 0")
    X = _stack(images)
    _check_fit(dictionary, X.shape[1:])
    if plan is None or (plan.height, plan.width) != X.shape[1:3]:
        plan = FrequencyPlan(X.shape[1], X.shape[2])
    Df = dictionary.spectra(plan)

    (Y, diags) = _admm_code(Df, X, lambda_l1, cfg, plan, init)

    converged = sum(diag.converged for diag in diags)
    iterations = max(diag.iterations for diag in diags)
    if wrapper is not None:
        wrapper.sparseCodingEnd(len(diags), iterations, converged, diags[0].rho[-1])
        if converged < len(diags):
            wrapper.warning(
                NOT_CONVERGED.code(),
                f"cbpdn: {len(diags) - converged} of {len(diags)} images not converged "
                f"after {iterations} iterations",
            )
    elif converged < len(diags):
        logger.debug("cbpdn: %d of %d images not converged", len(diags) - converged, len(diags))
    return ([CoefficientMaps(maps) for maps in Y], diags)


def cbpdn(
    dictionary: Dictionary,
    x_high,
    lambda_l1: float,
    cfg: AdmmConfig,
    plan: FrequencyPlan = None,
) -> tuple:
    """min_r 1/2 |sum_m d_m * r_m - x|^2 + lambda |r|_1. Non-convergence is
    reported in the diagnostics, never raised."""
    x = np.asarray(x_high, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., np.newaxis]
    check(x.ndim == 3, SHAPE_MISMATCH, f"x_high must be H x W x C, got {x.shape}")
    (maps, diags) = cbpdn_batch(dictionary, x[np.newaxis], lambda_l1, cfg, plan=plan)
    return (maps[0], diags[0])


def lambda_max(dictionary: Dictionary, x, plan: FrequencyPlan = None) -> float:
    """smallest lambda for which all-zero maps are optimal"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., np.newaxis]
    _check_fit(dictionary, x.shape)
    if plan is None or (plan.height, plan.width) != x.shape[:2]:
        plan = FrequencyPlan(x.shape[0], x.shape[1])
    corr = plan.inverse(_adjoint(dictionary.spectra(plan), plan.forward(x)[np.newaxis]), axes=(2, 3))
    return float(np.abs(corr).max())


def reconstruct(dictionary: Dictionary, maps: CoefficientMaps, plan: FrequencyPlan = None) -> np.ndarray:
    """sum_m d_m * r_m as an H x W x C array"""
    R = np.asarray(maps.maps if isinstance(maps, CoefficientMaps) else maps, dtype=np.float64)
    check(
        R.ndim == 3 and R.shape[0] == dictionary.atom_count,
        SHAPE_MISMATCH,
        f"maps {R.shape} for {dictionary.atom_count} atoms",
    )
    check(
        dictionary.filter_size <= min(R.shape[1], R.shape[2]),
        SHAPE_MISMATCH,
        f"filter size {dictionary.filter_size} exceeds maps {R.shape[1:]}",
    )
    if plan is None or (plan.height, plan.width) != R.shape[1:]:
        plan = FrequencyPlan(R.shape[1], R.shape[2])
    Df = dictionary.spectra(plan)
    return plan.inverse(_synthesize(Df, plan.forward(R, axes=(1, 2))[np.newaxis]), axes=(1, 2))[0]


def _project_atoms(D: np.ndarray, filter_size: int) -> np.ndarray:
    """zero outside the f x f support, then scale every atom into the unit ball"""
    D = D.copy()
    D[:, filter_size:, :, :] = 0.0
    D[:, :, filter_size:, :] = 0.0
    norms = np.sqrt((D ** 2).sum(axis=(1, 2, 3)))
    scale = np.where(norms > 1.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    return D * scale[:, np.newaxis, np.newaxis, np.newaxis]


def _dictionary_step(Y, Xf, D, filter_size, cfg: AdmmConfig, plan: FrequencyPlan) -> np.ndarray:
    """Consensus ADMM over per-image atom copies G_s, all tied to one
    projected dictionary D. D is M x H x W x C (zero outside the support)."""
    count = Y.shape[0]
    area = plan.height * plan.width
    Rf = plan.forward(Y, axes=(2, 3))
    power = (np.abs(Rf) ** 2).sum(axis=1)
    sigma = max(float(power.mean()), 1e-8)
    RhX = np.conj(Rf)[..., np.newaxis] * Xf[:, np.newaxis]

    Df = plan.forward(D, axes=(1, 2))
    Hf = np.zeros((count,) + Df.shape, dtype=np.complex128)
    for _ in range(cfg.max_iters):
        b = RhX + sigma * (Df[np.newaxis] - Hf)
        aTb = np.einsum("smhw,smhwc->shwc", Rf, b)
        Gf = (b - np.conj(Rf)[..., np.newaxis] * (aTb / (sigma + power[..., np.newaxis]))[:, np.newaxis]) / sigma

        Dprev = D
        D = _project_atoms(plan.inverse((Gf + Hf).mean(axis=0), axes=(1, 2)), filter_size)
        Df = plan.forward(D, axes=(1, 2))
        Hf = Hf + Gf - Df[np.newaxis]

        primal = np.sqrt((np.abs(Gf - Df[np.newaxis]) ** 2).sum() / area)
        dual = sigma * np.sqrt(count * ((D - Dprev) ** 2).sum())
        if primal < cfg.tol_primal and dual < cfg.tol_dual:
            break
        if cfg.rho_adapt:
            if primal > RHO_ADAPT_THRESHOLD * dual:
                sigma *= RHO_ADAPT_FACTOR
                Hf = Hf / RHO_ADAPT_FACTOR
            elif dual > RHO_ADAPT_THRESHOLD * primal:
                sigma /= RHO_ADAPT_FACTOR
                Hf = Hf * RHO_ADAPT_FACTOR
    return D


def initial_atoms(X: np.ndarray, M: int, filter_size: int, rng) -> np.ndarray:
    """Starting atoms cut from the images: the highest-energy f x f circular
    windows, no two overlapping in one image and no two nearly parallel, each
    nudged by a little seeded noise. Atoms the data cannot supply stay seeded
    Gaussian. All atoms have unit norm."""
    (count, height, width, channels) = X.shape
    f = filter_size
    atoms = rng.standard_normal((M, f, f, channels))
    atoms /= np.sqrt((atoms ** 2).sum(axis=(1, 2, 3)))[:, np.newaxis, np.newaxis, np.newaxis]

    power = np.pad((X ** 2).sum(axis=3), ((0, 0), (0, f - 1), (0, f - 1)), mode="wrap")
    energy = sliding_window_view(power, (f, f), axis=(1, 2)).sum(axis=(3, 4))
    order = np.argsort(-energy.ravel(), kind="stable")
    offsets = np.arange(f)
    chosen = []
    picked = []
    for flat in order:
        if len(picked) == M:
            break
        (n, i, j) = np.unravel_index(flat, energy.shape)
        if energy[n, i, j] <= 0.0:
            break
        if any(
            m == n and min((i - a) % height, (a - i) % height) < f and min((j - b) % width, (b - j) % width) < f
            for (m, a, b) in chosen
        ):
            continue
        window = X[n][np.ix_((i + offsets) % height, (j + offsets) % width)]
        window = window / np.sqrt((window ** 2).sum())
        if any(abs(float((window * other).sum())) > ATOM_INIT_MAX_CORRELATION for other in picked):
            continue
        chosen.append((n, i, j))
        picked.append(window)

    for (k, window) in enumerate(picked):
        atom = window + ATOM_INIT_JITTER * atoms[k]
        atoms[k] = atom / np.sqrt((atom ** 2).sum())
    logger.debug("initial_atoms: %d of %d atoms cut from %d image(s)", len(picked), M, count)
    return atoms


def learn_dictionary(
    images,
    M: int,
    filter_size: int,
    lambda_l1: float,
    cfg: AdmmConfig,
    seed: int,
    outer_iters: int = 10,
    wrapper: PipelineWrapper = None,
) -> Dictionary:
    """Alternates CBPDN over all images with a consensus dictionary update.
    Atoms start from initial_atoms and stay inside the unit ball after every
    outer iteration."""
    check(M >= 1, INVALID_ARGUMENT, f"atom count {M}")
    check(outer_iters >= 1, INVALID_ARGUMENT, f"outer_iters {outer_iters}")
    check(lambda_l1 >= 0, INVALID_ARGUMENT, f"lambda_l1 {lambda_l1} < 0")
    X = _stack(images)
    (count, height, width, channels) = X.shape
    check(
        1 <= filter_size <= min(height, width),
        SHAPE_MISMATCH,
        f"filter size {filter_size} for {height}x{width} images",
    )

    atoms = initial_atoms(X, M, filter_size, np.random.default_rng(seed))

    plan = FrequencyPlan(height, width)
    Xf = plan.forward(X, axes=(1, 2))
    dataNorm = max(float(np.sqrt((X ** 2).sum())), 1e-300)
    D = plan.pad(atoms, axes=(1, 2))
    Y = None
    history = []
    for outer in range(outer_iters):
        dictionary = Dictionary(D[:, :filter_size, :filter_size, :])
        (maps, diags) = cbpdn_batch(dictionary, X, lambda_l1, cfg, init=Y, plan=plan, wrapper=wrapper)
        Y = np.stack([m.maps for m in maps])

        D = _dictionary_step(Y, Xf, D, filter_size, cfg, plan)

        Df = plan.forward(D, axes=(1, 2))
        residual = plan.inverse(_synthesize(Df, plan.forward(Y, axes=(2, 3))), axes=(1, 2)) - X
        relError = float(np.sqrt((residual ** 2).sum()) / dataNorm)
        objective = float(0.5 * (residual ** 2).sum() + lambda_l1 * np.abs(Y).sum())
        maxNorm = float(np.sqrt((D ** 2).sum(axis=(1, 2, 3))).max())
        history.append({"outer": outer, "objective": objective, "rel_error": relError, "max_norm": maxNorm})
        logger.debug(
            "learn_dictionary outer %d: objective %s rel_error %s", outer,
            floatMaxString(objective, 6), floatMaxString(relError, 6),
        )
        if wrapper is not None:
            wrapper.dictionaryIteration(outer, objective, relError, maxNorm)

    return Dictionary(D[:, :filter_size, :filter_size, :], lambda_l1, seed, history)
