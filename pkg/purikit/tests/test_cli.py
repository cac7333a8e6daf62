"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import argparse
import contextlib
import io
import json
import os
import tempfile
import unittest

import numpy as np

from purikit.cli import RunContext, cmd_synth, main, parse_entry
from purikit.config import load_config
from purikit.tensorio import load_bundle
from purikit.wrapper import PipelineWrapper

TINY = [
    "dataset.class_count=3", "dataset.per_class=6", "dataset.test_per_class=2", "dataset.side=8",
    "net.epochs=1", "net.batch_size=8",
    "robust.epochs=1", "robust.batch_size=8", "robust.steps=1",
    "srd.psi_max=2", "srd.atoms=2", "srd.filter_size=3", "srd.outer_iters=1", "srd.admm_iters=3",
    "purify.max_iters=5",
    'attacks=[{"method": "fgsm", "norm": "l2", "epsilon": 0.04}, {"method": "fgsm", "norm": "l2", "epsilon": 0.08}]',
]


def run(*argv) -> tuple:
    stderr = io.StringIO()
    with contextlib.redirect_stderr(stderr):
        status = main(list(argv))
    return (status, stderr.getvalue())


def read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


class StageRecorder(PipelineWrapper):
    def __init__(self):
        PipelineWrapper.__init__(self)
        self.stages = []

    def stageEnd(self, stage: str, artifact: str):
        self.stages.append((stage, os.path.basename(artifact)))


class CliTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.first = os.path.join(cls.tmp.name, "first")
        cls.status = main(["full-run", "--out", cls.first, "--seed", "5"] + TINY)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def setUp(self):
        pass

    def tearDown(self):
        pass

    def test_full_run_artifacts(self):
        self.assertEqual(self.status, 0)
        for name in ("dataset.pkit", "test.pkit", "baseline.pkit", "srd.pkit", "robust.pkit",
                     "attacked_0.pkit", "attacked_1.pkit", "purified.pkit", "report.txt", "records.jsonl"):
            self.assertTrue(os.path.exists(os.path.join(self.first, name)), name)

        lines = read(os.path.join(self.first, "report.txt")).decode().splitlines()
        self.assertEqual(lines[0], "purikit evaluation report")
        self.assertEqual([line.split()[1] for line in lines[2:]], ["clean", "fgsm-l2-eps0.04", "fgsm-l2-eps0.08"])

        records = read(os.path.join(self.first, "records.jsonl")).decode().splitlines()
        self.assertEqual(len(records), 3 * 6)
        self.assertIsNotNone(json.loads(records[0])["purified_prediction"])

        baseline = load_bundle(os.path.join(self.first, "baseline.pkit"))
        self.assertEqual(baseline.manifest["role"], "baseline")
        self.assertEqual(baseline.manifest["seed"], 5 + 101)
        attacked = load_bundle(os.path.join(self.first, "attacked_1.pkit"))
        self.assertEqual(attacked.manifest["label"], "fgsm-l2-eps0.08")

    def test_full_run_is_reproducible(self):
        second = os.path.join(self.tmp.name, "second")
        self.assertEqual(main(["full-run", "--out", second, "--seed", "5"] + TINY), 0)
        for name in ("report.txt", "records.jsonl", "baseline.pkit", "srd.pkit", "robust.pkit", "purified.pkit"):
            self.assertEqual(read(os.path.join(self.first, name)), read(os.path.join(second, name)), name)

    def test_purify_forced_entry(self):
        (status, _) = run("purify", "--out", self.first, "--entry", "0:0", *TINY)
        self.assertEqual(status, 0)
        bundle = load_bundle(os.path.join(self.first, "purified.pkit"))
        self.assertEqual(bundle.manifest["source"], "test")
        self.assertTrue(np.all(bundle.arrays["class_id"] == 0))
        self.assertTrue(np.all(bundle.arrays["cluster_index"] == 0))
        self.assertEqual(len(bundle.arrays["md"]), 6)

    def test_missing_artifact(self):
        with tempfile.TemporaryDirectory() as empty:
            (status, stderr) = run("purify", "--out", empty)
        self.assertEqual(status, 3)
        self.assertIn("'srd'", stderr)
        self.assertIn("[dependency]", stderr)

    def test_config_errors(self):
        with tempfile.TemporaryDirectory() as out:
            (status, stderr) = run("synth", "--out", out, "srd.atom=3")
            self.assertEqual(status, 2)
            self.assertIn("srd.atom", stderr)
            (status, _) = run("synth", "--out", out, "--config", os.path.join(out, "absent.json"))
            self.assertEqual(status, 2)
            self.assertFalse(os.path.exists(os.path.join(out, "dataset.pkit")))

    def test_stage_callbacks(self):
        with tempfile.TemporaryDirectory() as out:
            recorder = StageRecorder()
            cmd_synth(RunContext(load_config(overrides=TINY + [("out", out)]), recorder))
        self.assertEqual(recorder.stages, [("synth", "dataset.pkit"), ("synth", "test.pkit")])

    def test_parse_entry(self):
        self.assertEqual(parse_entry("2:1"), (2, 1))
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_entry("2")
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_entry("a:b")


if "__main__" == __name__:
    unittest.main()
