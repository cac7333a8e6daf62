"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import unittest

import numpy as np

from purikit.errors import NOT_CONVERGED
from purikit.signal import circular_convolve
from purikit.sparse import (
    AdmmConfig,
    CoefficientMaps,
    Dictionary,
    cbpdn,
    cbpdn_batch,
    initial_atoms,
    lambda_max,
    learn_dictionary,
    reconstruct,
    soft_threshold,
)
from purikit.utils import PurikitError
from purikit.wrapper import PipelineWrapper


def random_dictionary(rng, count=4, size=5, channels=1):
    atoms = rng.standard_normal((count, size, size, channels))
    atoms /= np.sqrt((atoms ** 2).sum(axis=(1, 2, 3)))[:, None, None, None]
    return Dictionary(atoms)


def objective(dictionary, maps, x, lam):
    residual = reconstruct(dictionary, maps) - x
    return 0.5 * (residual ** 2).sum() + lam * np.abs(maps.maps).sum()


class RecordingWrapper(PipelineWrapper):
    def __init__(self):
        PipelineWrapper.__init__(self)
        self.calls = []

    def sparseCodingEnd(self, images, iterations, converged, rho):
        self.calls.append(("sparseCodingEnd", images, converged))

    def warning(self, code, text):
        self.calls.append(("warning", code, text))

    def dictionaryIteration(self, outer, objective, relError, maxAtomNorm):
        self.calls.append(("dictionaryIteration", outer, maxAtomNorm))


class SparseTestCase(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(17)

    def tearDown(self):
        pass

    def test_soft_threshold(self):
        self.assertEqual(soft_threshold(0.5, 1.0), 0.0)
        self.assertEqual(soft_threshold(2.0, 1.0), 1.0)
        self.assertEqual(soft_threshold(-3.0, 0.5), -2.5)
        np.testing.assert_array_equal(soft_threshold([1.0, -1.0, 0.2], 0.0), [1.0, -1.0, 0.2])
        with self.assertRaises(PurikitError):
            soft_threshold(1.0, -0.1)

    def test_zero_input(self):
        dictionary = random_dictionary(self.rng)
        (maps, diag) = cbpdn(dictionary, np.zeros((16, 16, 1)), 0.05, AdmmConfig())
        self.assertEqual(maps.maps.shape, (4, 16, 16))
        self.assertFalse(np.any(maps.maps))
        self.assertTrue(diag.converged)
        self.assertEqual(maps.sparsity(), 1.0)

    def test_above_lambda_max(self):
        dictionary = random_dictionary(self.rng)
        x = self.rng.standard_normal((16, 16, 1)) * 0.2
        lam = 2.0 * lambda_max(dictionary, x)
        (maps, _) = cbpdn(dictionary, x, lam, AdmmConfig(max_iters=500))
        energy = (reconstruct(dictionary, maps) ** 2).sum()
        self.assertLess(energy, 1e-8 * (x ** 2).sum())

    def test_planted_recovery(self):
        dictionary = random_dictionary(self.rng)
        truth = np.zeros((4, 16, 16))
        truth[0, 3, 4] = 1.0
        truth[0, 10, 12] = -0.7
        truth[2, 7, 1] = 0.5
        x = reconstruct(dictionary, CoefficientMaps(truth))
        lam = 1e-3 * lambda_max(dictionary, x)
        (maps, _) = cbpdn(dictionary, x, lam, AdmmConfig(max_iters=1000, tol_primal=1e-6, tol_dual=1e-6))
        relError = np.linalg.norm(reconstruct(dictionary, maps) - x) / np.linalg.norm(x)
        self.assertLess(relError, 1e-2)

    def test_converged_means_small_residuals(self):
        dictionary = random_dictionary(self.rng, channels=3)
        x = self.rng.standard_normal((12, 12, 3)) * 0.1
        cfg = AdmmConfig(max_iters=400)
        (_, diag) = cbpdn(dictionary, x, 0.05, cfg)
        self.assertEqual(len(diag.objective), diag.iterations)
        if diag.converged:
            self.assertLess(diag.primal[-1], cfg.tol_primal)
            self.assertLess(diag.dual[-1], cfg.tol_dual)

    def test_never_worse_than_zero(self):
        dictionary = random_dictionary(self.rng)
        for iters in (1, 2, 5, 50):
            x = self.rng.standard_normal((10, 10, 1))
            lam = 0.3
            (maps, diag) = cbpdn(dictionary, x, lam, AdmmConfig(max_iters=iters))
            self.assertLessEqual(objective(dictionary, maps, x, lam), 0.5 * (x ** 2).sum() + 1e-9)
            if iters == 1:
                self.assertFalse(diag.converged)

    def test_delta_atom_least_squares(self):
        atom = np.zeros((1, 3, 3, 1))
        atom[0, 0, 0, 0] = 1.0
        dictionary = Dictionary(atom)
        x = self.rng.standard_normal((8, 8, 1))
        (maps, diag) = cbpdn(dictionary, x, 0.0, AdmmConfig(max_iters=500))
        self.assertTrue(diag.converged)
        np.testing.assert_allclose(reconstruct(dictionary, maps), x, atol=1e-3)

    def test_batch_matches_single(self):
        dictionary = random_dictionary(self.rng)
        images = self.rng.standard_normal((3, 12, 12, 1)) * 0.3
        wrapper = RecordingWrapper()
        (batch, diags) = cbpdn_batch(dictionary, images, 0.05, AdmmConfig(max_iters=5), wrapper=wrapper)
        self.assertEqual(len(batch), 3)
        self.assertEqual(len(diags), 3)
        self.assertEqual(wrapper.calls[0][0:2], ("sparseCodingEnd", 3))
        warnings = [call for call in wrapper.calls if call[0] == "warning"]
        self.assertTrue(warnings)
        self.assertEqual(warnings[0][1], NOT_CONVERGED.code())
        for maps in batch:
            self.assertEqual(maps.maps.shape, (4, 12, 12))

    def test_shape_checks(self):
        dictionary = random_dictionary(self.rng, channels=3)
        with self.assertRaises(PurikitError):
            cbpdn(dictionary, np.zeros((16, 16, 1)), 0.1, AdmmConfig())
        with self.assertRaises(PurikitError):
            cbpdn(random_dictionary(self.rng, size=9), np.zeros((8, 8, 1)), 0.1, AdmmConfig())
        with self.assertRaises(PurikitError):
            reconstruct(dictionary, CoefficientMaps(np.zeros((3, 8, 8))))

    def test_reconstruct(self):
        dictionary = random_dictionary(self.rng, count=3, size=3)
        self.assertFalse(np.any(reconstruct(dictionary, CoefficientMaps(np.zeros((3, 8, 8))))))

        spike = np.zeros((3, 8, 8))
        spike[1, 0, 0] = 1.0
        expected = np.zeros((8, 8, 1))
        expected[:3, :3, :] = dictionary.atoms[1]
        np.testing.assert_allclose(reconstruct(dictionary, CoefficientMaps(spike)), expected, atol=1e-12)

        maps = self.rng.standard_normal((3, 8, 8))
        total = sum(circular_convolve(maps[m], dictionary.atoms[m, :, :, 0]) for m in range(3))
        np.testing.assert_allclose(reconstruct(dictionary, CoefficientMaps(maps))[:, :, 0], total, atol=1e-10)

    def test_learned_atoms_stay_in_unit_ball(self):
        images = self.rng.random((6, 12, 12, 1))
        wrapper = RecordingWrapper()
        dictionary = learn_dictionary(images, 4, 3, 0.05, AdmmConfig(max_iters=30), seed=3,
                                      outer_iters=3, wrapper=wrapper)
        self.assertEqual(dictionary.atoms.shape, (4, 3, 3, 1))
        self.assertTrue(np.all(dictionary.norms() <= 1.0 + 1e-9))
        self.assertEqual(len(dictionary.history), 3)
        for record in dictionary.history:
            self.assertLessEqual(record["max_norm"], 1.0 + 1e-9)
        outers = [call[1] for call in wrapper.calls if call[0] == "dictionaryIteration"]
        self.assertEqual(outers, [0, 1, 2])

    def test_learning_is_seeded(self):
        images = self.rng.random((4, 10, 10, 1))
        cfg = AdmmConfig(max_iters=20)
        a = learn_dictionary(images, 3, 3, 0.05, cfg, seed=9, outer_iters=2)
        b = learn_dictionary(images, 3, 3, 0.05, cfg, seed=9, outer_iters=2)
        np.testing.assert_array_equal(a.atoms, b.atoms)

    def test_initial_atoms_cut_from_windows(self):
        kernels = self.rng.standard_normal((2, 5, 5))
        kernels /= np.sqrt((kernels ** 2).sum(axis=(1, 2)))[:, None, None]
        image = np.zeros((1, 16, 16, 1))
        image[0, :5, :5, 0] = kernels[0]
        image[0, 8:13, 8:13, 0] = kernels[1]
        atoms = initial_atoms(image, 3, 5, np.random.default_rng(0))
        self.assertEqual(atoms.shape, (3, 5, 5, 1))
        np.testing.assert_allclose(np.sqrt((atoms ** 2).sum(axis=(1, 2, 3))), 1.0)
        for kernel in kernels:
            best = max(float((atom[:, :, 0] * kernel).sum()) for atom in atoms[:2])
            self.assertGreaterEqual(best, 0.99)

    def test_initial_atoms_of_blank_images(self):
        atoms = initial_atoms(np.zeros((2, 8, 8, 1)), 2, 3, np.random.default_rng(4))
        again = np.random.default_rng(4).standard_normal((2, 3, 3, 1))
        again /= np.sqrt((again ** 2).sum(axis=(1, 2, 3)))[:, None, None, None]
        np.testing.assert_array_equal(atoms, again)

    def test_planted_atom_is_kept(self):
        kernel = np.random.default_rng(3).standard_normal((5, 5))
        kernel /= np.linalg.norm(kernel)
        image = np.zeros((16, 16, 1))
        image[:5, :5, 0] = kernel
        dictionary = learn_dictionary([image], 1, 5, 1e-4, AdmmConfig(max_iters=50), seed=0, outer_iters=2)
        atom = np.zeros((16, 16))
        atom[:5, :5] = dictionary.atoms[0, :, :, 0]
        planted = np.zeros((16, 16))
        planted[:5, :5] = kernel
        corr = np.fft.ifft2(np.fft.fft2(atom) * np.conj(np.fft.fft2(planted))).real
        self.assertGreaterEqual(np.abs(corr).max() / np.linalg.norm(atom), 0.99)

    def test_learning_rejects(self):
        with self.assertRaises(PurikitError):
            learn_dictionary(self.rng.random((2, 8, 8, 1)), 0, 3, 0.05, AdmmConfig(), seed=0)
        with self.assertRaises(PurikitError):
            learn_dictionary([], 2, 3, 0.05, AdmmConfig(), seed=0)


if "__main__" == __name__:
    unittest.main()
