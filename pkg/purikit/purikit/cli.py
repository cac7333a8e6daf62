"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Command line front end. Every command reads and writes artifact bundles in the
output directory:

    synth           -> dataset.pkit, test.pkit
    train-baseline  dataset            -> baseline.pkit
    build-srd       dataset, baseline  -> srd.pkit
    train-robust    dataset, srd       -> robust.pkit
    attack          test, baseline     -> attacked_<i>.pkit per attack entry
    purify          srd, robust, test  -> purified.pkit
    eval            test, baseline, srd, robust -> report.txt, records.jsonl
    full-run        all of the above in order

Exit status: 0 success, 1 internal, 2 config, 3 missing artifact,
4 corrupt artifact, 5 input data, 6 numerical/argument.
"""

import argparse
import logging
import os
import sys

import numpy as np

from purikit import get_version_string
from purikit import net
from purikit.config import load_config, RunConfig
from purikit.errors import MISSING_ARTIFACT, EXIT_STATUS, CATEGORY_INTERNAL
from purikit.pipeline import (
    Purifier,
    build_srd,
    attack_dataset,
    evaluate_targets,
    srd_from_bundle,
    srd_to_bundle,
)
from purikit.report import write_report
from purikit.tensorio import (
    LabeledDataset,
    dataset_from_bundle,
    dataset_to_bundle,
    generate_synthetic_dataset,
    load_bundle,
    load_cifar10_binary,
    save_bundle,
    split_dataset,
)
from purikit.utils import PurikitError
from purikit.wrapper import PipelineWrapper

logger = logging.getLogger(__name__)

ARTIFACTS = {
    "dataset": "dataset.pkit",
    "test": "test.pkit",
    "baseline": "baseline.pkit",
    "srd": "srd.pkit",
    "robust": "robust.pkit",
    "purified": "purified.pkit",
}
LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


class RunContext(object):
    def __init__(self, config: RunConfig, wrapper: PipelineWrapper = None, source=None, target="baseline", entry=None):
        self.config = config
        self.outDir = config.outDir()
        self.wrapper = wrapper if wrapper is not None else PipelineWrapper()
        self.source = source
        self.target = target
        self.entry = entry

    def path(self, name: str) -> str:
        return os.path.join(self.outDir, ARTIFACTS.get(name, name))

    def require(self, name: str) -> str:
        path = self.path(name)
        if not os.path.exists(path):
            raise PurikitError.fromPair(MISSING_ARTIFACT, f"'{name}' ({path}) has not been produced")
        return path

    def write(self, name: str, bundle, stage: str):
        os.makedirs(self.outDir, exist_ok=True)
        path = self.path(name)
        save_bundle(bundle, path)
        self.wrapper.stageEnd(stage, path)
        return path

    def dataset(self, name: str) -> LabeledDataset:
        return dataset_from_bundle(load_bundle(self.require(name)))

    def params(self, name: str) -> net.NetworkParams:
        return net.params_from_bundle(load_bundle(self.require(name)))

    def srd(self):
        return srd_from_bundle(load_bundle(self.require("srd")))


def _history_manifest(history: list) -> dict:
    return {"history": history, "final_accuracy": history[-1]["accuracy"] if history else None}


def cmd_synth(ctx: RunContext):
    cfg = ctx.config
    section = cfg.section("dataset")
    if section["source"] == "synthetic":
        train = generate_synthetic_dataset(
            section["class_count"], section["per_class"], section["side"],
            section["noise_sigma"], cfg.stageSeed("dataset"), section["contrast"])
        test = generate_synthetic_dataset(
            section["class_count"], section["test_per_class"], section["side"],
            section["noise_sigma"], cfg.stageSeed("test"), section["contrast"])
    else:
        train = load_cifar10_binary(section["train_path"], section["limit"])
        if section["test_path"]:
            test = load_cifar10_binary(section["test_path"], section["limit"])
        else:
            (train, test) = split_dataset(train, section["test_fraction"], cfg.stageSeed("test"))
    meta = {"source": section["source"]}
    ctx.write("dataset", dataset_to_bundle(train, dict(meta, split="train")), "synth")
    ctx.write("test", dataset_to_bundle(test, dict(meta, split="test")), "synth")


def cmd_train_baseline(ctx: RunContext):
    dataset = ctx.dataset("dataset")
    trainCfg = ctx.config.trainConfig()
    (params, history) = net.train_baseline(dataset, trainCfg, ctx.wrapper)
    meta = dict(_history_manifest(history), role="baseline", seed=trainCfg.seed)
    ctx.write("baseline", net.params_to_bundle(params, meta), "train-baseline")


def cmd_build_srd(ctx: RunContext):
    dataset = ctx.dataset("dataset")
    params = ctx.params("baseline")
    phi = build_srd(params, dataset, ctx.config.srdConfig(), ctx.wrapper, ctx.config.threads)
    ctx.write("srd", srd_to_bundle(phi), "build-srd")


def cmd_train_robust(ctx: RunContext):
    dataset = ctx.dataset("dataset")
    phi = ctx.srd()
    robustCfg = ctx.config.robustConfig()
    init = ctx.params("baseline") if robustCfg.init == "baseline" else None
    (params, history) = net.train_robust(dataset, phi, robustCfg, ctx.wrapper, init)
    meta = dict(_history_manifest(history), role="robust", seed=robustCfg.seed, alpha=robustCfg.alpha)
    ctx.write("robust", net.params_to_bundle(params, meta), "train-robust")


def cmd_attack(ctx: RunContext):
    test = ctx.dataset("test")
    params = ctx.params(ctx.target)
    for (index, attackCfg) in enumerate(ctx.config.attackConfigs()):
        adversarial = attack_dataset(params, test.images, test.labels, attackCfg, ctx.config.threads)
        attacked = LabeledDataset(adversarial, test.labels, test.class_count)
        meta = {"attack": attackCfg.toDict(), "target": ctx.target, "label": attackCfg.label()}
        ctx.write(f"attacked_{index}.pkit", dataset_to_bundle(attacked, meta), "attack")


def _purifier(ctx: RunContext) -> Purifier:
    phi = ctx.srd()
    robust = ctx.params("robust")
    return Purifier(robust, phi, ctx.config.tikhonovConfig(), ctx.config.cbpdnConfig())


def cmd_purify(ctx: RunContext):
    purifier = _purifier(ctx)
    source = ctx.source or "test"
    dataset = ctx.dataset(source)
    (purified, traces) = purifier.purifyAll(dataset.images, ctx.config.threads, ctx.wrapper, ctx.entry)
    bundle = dataset_to_bundle(LabeledDataset(purified, dataset.labels, dataset.class_count), {"source": source})
    bundle.arrays["class_id"] = np.array([t.class_id for t in traces], dtype=np.int64)
    bundle.arrays["cluster_index"] = np.array([t.cluster_index for t in traces], dtype=np.int64)
    bundle.arrays["md"] = np.array([t.md for t in traces], dtype=np.float64)
    bundle.arrays["converged"] = np.array([t.converged for t in traces], dtype=np.int32)
    ctx.write("purified", bundle, "purify")


def cmd_eval(ctx: RunContext):
    cfg = ctx.config
    test = ctx.dataset("test")
    targets = [(name, ctx.params(name)) for name in cfg.section("eval")["targets"]]
    purifier = _purifier(ctx) if cfg.section("eval")["purify"] else None
    report = evaluate_targets(targets, test, cfg.attackConfigs(), purifier, cfg.threads, ctx.wrapper)
    os.makedirs(ctx.outDir, exist_ok=True)
    (tablePath, _) = write_report(report, ctx.outDir)
    for (key, seconds) in sorted(report.runtime.items()):
        logger.info("runtime %s: %.3fs", key, seconds)
    ctx.wrapper.stageEnd("eval", tablePath)


def cmd_full_run(ctx: RunContext):
    for command in (cmd_synth, cmd_train_baseline, cmd_build_srd, cmd_train_robust, cmd_attack, cmd_purify,
                    cmd_eval):
        command(ctx)


COMMANDS = {
    "synth": cmd_synth,
    "train-baseline": cmd_train_baseline,
    "build-srd": cmd_build_srd,
    "train-robust": cmd_train_robust,
    "attack": cmd_attack,
    "purify": cmd_purify,
    "eval": cmd_eval,
    "full-run": cmd_full_run,
}


def parse_entry(text: str) -> tuple:
    try:
        (classId, clusterIndex) = text.split(":")
        return (int(classId), int(clusterIndex))
    except ValueError:
        raise argparse.ArgumentTypeError(f"entry must be class:cluster, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="store", dest="config", default=None, help="JSON run configuration")
    common.add_argument("--out", action="store", dest="out", default=None,
                        help="output directory (default: config 'out', then $PURIKIT_OUT)")
    common.add_argument("--seed", action="store", type=int, dest="seed", default=None, help="run seed")
    common.add_argument("--threads", action="store", type=int, dest="threads", default=None,
                        help="worker threads; 1 is bit-exact reproducible")
    common.add_argument("--log-level", action="store", dest="logLevel", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="logging level")
    common.add_argument("overrides", nargs="*", metavar="section.key=value", help="config overrides")

    parser = argparse.ArgumentParser("purikit", description="latent-clustered sparse-code purification")
    parser.add_argument("--version", action="version", version=get_version_string())
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True
    for name in COMMANDS:
        sub = commands.add_parser(name, parents=[common], help=(COMMANDS[name].__doc__ or name))
        if name == "purify":
            sub.add_argument("--input", action="store", dest="source", default=None,
                             help="dataset artifact to purify (default: test)")
            sub.add_argument("--entry", action="store", dest="entry", default=None, type=parse_entry,
                             help="force the dictionary of cluster c:j instead of the matched one")
        if name == "attack":
            sub.add_argument("--target", action="store", dest="target", default="baseline",
                             choices=("baseline", "robust"), help="classifier the attacks are crafted against")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.logLevel), format=LOG_FORMAT)

    overrides = list(args.overrides)
    for (key, value) in (("seed", args.seed), ("threads", args.threads), ("out", args.out)):
        if value is not None:
            overrides.append((key, value))

    wrapper = PipelineWrapper()
    try:
        config = load_config(args.config, overrides)
        ctx = RunContext(
            config, wrapper, getattr(args, "source", None), getattr(args, "target", "baseline"),
            getattr(args, "entry", None))
        logger.info("running %s with %s", args.command, config)
        COMMANDS[args.command](ctx)
    except PurikitError as ex:
        wrapper.error(ex.code, str(ex))
        print(f"purikit: error [{ex.category or CATEGORY_INTERNAL}] {ex}", file=sys.stderr)
        return ex.exitStatus
    except Exception:
        logger.exception("unhandled exception in %s", args.command)
        return EXIT_STATUS[CATEGORY_INTERNAL]
    return 0


if "__main__" == __name__:
    sys.exit(main())
