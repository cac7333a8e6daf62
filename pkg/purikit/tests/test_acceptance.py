"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Seeded desk-scale measurements. They train real networks and dictionaries, so
they only run with PURIKIT_SLOW=1.
"""

import os
import unittest

import numpy as np

from purikit import net
from purikit.attack import AttackConfig, AttackMethod, NormKind, bim, fgsm, pgd
from purikit.pipeline import Purifier, SrdConfig, build_srd, evaluate, mean_adversarial_md
from purikit.signal import TikhonovConfig
from purikit.sparse import AdmmConfig, CbpdnConfig, learn_dictionary
from purikit.tensorio import generate_synthetic_dataset

SLOW = os.environ.get("PURIKIT_SLOW", "") not in ("", "0")


def aligned_correlation(atom: np.ndarray, kernel: np.ndarray, side: int) -> float:
    """max |<shifted atom, kernel>| over circular shifts, both normalized"""
    a = np.zeros((side, side))
    k = np.zeros((side, side))
    a[:atom.shape[0], :atom.shape[1]] = atom
    k[:kernel.shape[0], :kernel.shape[1]] = kernel
    corr = np.fft.ifft2(np.fft.fft2(a) * np.conj(np.fft.fft2(k))).real
    return float(np.abs(corr).max() / (np.linalg.norm(a) * np.linalg.norm(k)))


@unittest.skipUnless(SLOW, "set PURIKIT_SLOW=1 for the desk-scale measurements")
class DictionaryAcceptanceTestCase(unittest.TestCase):
    def test_planted_atom(self):
        rng = np.random.default_rng(3)
        kernel = rng.standard_normal((5, 5))
        kernel /= np.linalg.norm(kernel)
        image = np.zeros((16, 16, 1))
        image[:5, :5, 0] = kernel
        dictionary = learn_dictionary([image], 1, 5, 1e-4, AdmmConfig(max_iters=200), seed=0, outer_iters=30)
        self.assertGreaterEqual(aligned_correlation(dictionary.atoms[0, :, :, 0], kernel, 16), 0.99)

    def test_four_atom_dictionary(self):
        rng = np.random.default_rng(4)
        atoms = rng.standard_normal((4, 5, 5))
        atoms /= np.linalg.norm(atoms.reshape(4, -1), axis=1)[:, np.newaxis, np.newaxis]
        images = []
        for _ in range(20):
            image = np.zeros((16, 16))
            for m in range(4):
                maps = np.zeros((16, 16))
                spots = rng.choice(16 * 16, size=3, replace=False)
                maps.flat[spots] = rng.uniform(0.5, 1.5, size=3) * rng.choice((-1.0, 1.0), size=3)
                kernel = np.zeros((16, 16))
                kernel[:5, :5] = atoms[m]
                image += np.fft.ifft2(np.fft.fft2(kernel) * np.fft.fft2(maps)).real
            images.append(image[..., np.newaxis])
        dictionary = learn_dictionary(images, 4, 5, 1e-3, AdmmConfig(max_iters=100), seed=1, outer_iters=40)
        self.assertLessEqual(dictionary.history[-1]["rel_error"], 0.05)
        self.assertLessEqual(max(h["max_norm"] for h in dictionary.history), 1.0 + 1e-9)


@unittest.skipUnless(SLOW, "set PURIKIT_SLOW=1 for the desk-scale measurements")
class TrainingAcceptanceTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.train = generate_synthetic_dataset(4, 100, 16, 0.002, 0, contrast=0.04)
        cls.test = generate_synthetic_dataset(4, 50, 16, 0.002, 1, contrast=0.04)
        (cls.baseline, cls.history) = net.train_baseline(cls.train, net.TrainConfig(seed=101))
        cls.phi = build_srd(
            cls.baseline, cls.train, SrdConfig(lambda_l1=0.005, seed=202, admm=AdmmConfig(max_iters=50)))
        cls.robustCfg = net.RobustTrainConfig(
            alpha=0.05, inner_attack=AttackConfig(AttackMethod.PGD, NormKind.L2, 0.08, steps=10, seed=303),
            learning_rate=0.01, seed=303)
        (cls.robust, _) = net.train_robust(cls.train, cls.phi, cls.robustCfg, init=cls.baseline)
        cls.purifier = Purifier(cls.robust, cls.phi, TikhonovConfig(), CbpdnConfig(0.01))

    def misclassified(self, images) -> float:
        return float(np.mean(net.predict(self.baseline, images) != self.test.labels))

    def test_two_class_training(self):
        train = generate_synthetic_dataset(2, 100, 16, 0.05, 0)
        (params, _) = net.train_baseline(train, net.TrainConfig(epochs=20, seed=5))
        self.assertGreaterEqual(net.accuracy(params, train.images, train.labels), 0.95)

    def test_bim_at_least_fgsm(self):
        fast = AttackConfig(AttackMethod.FGSM, NormKind.L2, 0.04)
        iterative = AttackConfig(AttackMethod.BIM, NormKind.L2, 0.04, steps=100)
        x = self.test.images
        y = self.test.labels
        self.assertGreaterEqual(
            self.misclassified(bim(self.baseline, x, y, iterative)),
            self.misclassified(fgsm(self.baseline, x, y, fast)))

    def test_misclassification_grows_with_budget(self):
        rates = [
            self.misclassified(fgsm(self.baseline, self.test.images, self.test.labels,
                                    AttackConfig(AttackMethod.FGSM, NormKind.L2, eps)))
            for eps in (0.0, 0.02, 0.04, 0.08)
        ]
        self.assertEqual(rates, sorted(rates))

    def test_pgd_random_start(self):
        x = self.train.images[:200]
        y = self.train.labels[:200]
        cfg = AttackConfig(AttackMethod.PGD, NormKind.L2, 0.08, steps=20, step_size=0.04, seed=9)
        withStart = net.sample_losses(self.baseline, pgd(self.baseline, x, y, cfg), y)
        without = net.sample_losses(self.baseline, bim(self.baseline, x, y, cfg), y)
        self.assertGreaterEqual(float(np.mean(withStart >= 0.9 * without)), 0.6)

    def test_end_to_end_purification(self):
        attack = AttackConfig(AttackMethod.FGSM, NormKind.L2, 0.08, seed=404)
        report = evaluate(self.baseline, self.test, [attack], self.purifier)
        clean = report.row("baseline", "clean")
        attacked = report.row("baseline", attack.label())

        self.assertGreaterEqual(clean.accuracy, 0.9)
        drop = clean.accuracy - attacked.accuracy
        self.assertGreaterEqual(drop, 0.2)
        self.assertGreaterEqual(attacked.purified_accuracy - attacked.accuracy, 0.5 * drop)
        self.assertGreaterEqual(clean.purified_accuracy, clean.accuracy - 0.1)

    def test_purification_is_self_consistent(self):
        (once, _) = self.purifier.purifyAll(self.train.images)
        (twice, _) = self.purifier.purifyAll(once)
        before = net.predict(self.baseline, self.train.images)
        first = net.predict(self.baseline, once)
        second = net.predict(self.baseline, twice)
        self.assertGreaterEqual(float(np.mean(first == before)), 0.95)
        self.assertGreaterEqual(float(np.mean(second == first)), 0.9)

    def test_robust_training_pulls_latents_to_clusters(self):
        inner = self.robustCfg.inner_attack
        mdBefore = mean_adversarial_md(self.baseline, self.train, self.phi, inner, use_recorded=True)
        mdAfter = mean_adversarial_md(self.robust, self.train, self.phi, inner, use_recorded=True)
        self.assertLess(mdAfter, mdBefore)


if "__main__" == __name__:
    unittest.main()
