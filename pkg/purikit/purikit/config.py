"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Run configuration: a JSON document validated against a fixed schema before any
compute starts, dotted command line overrides, and the stage seed rule

    dataset = seed + 0      test     = seed + 1
    baseline = seed + 101   srd      = seed + 202
    robust  = seed + 303    attack i = seed + 404 + i
    purify  = seed + 505
"""

import copy
import json
import logging
import os

from purikit.attack import AttackConfig, AttackMethod, NormKind
from purikit.const import (
    OUT_ENV_VAR,
    SEED_OFFSET_DATASET,
    SEED_OFFSET_TEST,
    SEED_OFFSET_BASELINE,
    SEED_OFFSET_SRD,
    SEED_OFFSET_ROBUST,
    SEED_OFFSET_ATTACK,
    SEED_OFFSET_PURIFY,
)
from purikit.errors import CONFIG_UNKNOWN_KEY, CONFIG_BAD_VALUE, MISSING_ARTIFACT
from purikit.net import TrainConfig, RobustTrainConfig
from purikit.object_implem import Object
from purikit.pipeline import SrdConfig
from purikit.signal import TikhonovConfig
from purikit.sparse import AdmmConfig, CbpdnConfig
from purikit.utils import PurikitError

logger = logging.getLogger(__name__)

DEFAULT_OUT = "purikit-out"

STAGE_OFFSETS = {
    "dataset": SEED_OFFSET_DATASET,
    "test": SEED_OFFSET_TEST,
    "baseline": SEED_OFFSET_BASELINE,
    "srd": SEED_OFFSET_SRD,
    "robust": SEED_OFFSET_ROBUST,
    "attack": SEED_OFFSET_ATTACK,
    "purify": SEED_OFFSET_PURIFY,
}


class Field(object):
    def __init__(self, kind, default, minimum=None, exclusive=False, choices=None, nullable=False, maximum=None):
        self.kind = kind
        self.default = default
        self.minimum = minimum
        self.maximum = maximum
        self.exclusive = exclusive
        self.choices = choices
        self.nullable = nullable

    def validate(self, path: str, value):
        if value is None:
            if self.nullable:
                return None
            raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"{path} must not be null")
        if self.kind is bool:
            ok = isinstance(value, bool)
        elif self.kind is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif self.kind is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        else:
            ok = isinstance(value, self.kind)
        if not ok:
            raise PurikitError.fromPair(
                CONFIG_BAD_VALUE, f"{path} must be {self.kind.__name__}, got {value!r}")
        if self.choices is not None and value not in self.choices:
            raise PurikitError.fromPair(
                CONFIG_BAD_VALUE, f"{path} must be one of {list(self.choices)}, got {value!r}")
        if self.minimum is not None:
            if value < self.minimum or (self.exclusive and value == self.minimum):
                bound = ">" if self.exclusive else ">="
                raise PurikitError.fromPair(
                    CONFIG_BAD_VALUE, f"{path} must be {bound} {self.minimum}, got {value!r}")
        if self.maximum is not None and value > self.maximum:
            raise PurikitError.fromPair(
                CONFIG_BAD_VALUE, f"{path} must be <= {self.maximum}, got {value!r}")
        return value


ATTACK_SCHEMA = {
    "method": Field(str, None, choices=("fgsm", "bim", "pgd")),
    "norm": Field(str, "l2", choices=("l2", "linf")),
    "epsilon": Field(float, None, minimum=0.0),
    "steps": Field(int, None, minimum=1, nullable=True),
    "step_size": Field(float, None, minimum=0.0, exclusive=True, nullable=True),
}

TRAIN_SCHEMA = {
    "epochs": Field(int, 20, minimum=1),
    "batch_size": Field(int, 32, minimum=1),
    "learning_rate": Field(float, 0.05, minimum=0.0),
    "weight_decay": Field(float, 1e-4, minimum=0.0),
}

SCHEMA = {
    "seed": Field(int, 0, minimum=0),
    "threads": Field(int, 1, minimum=1),
    "out": Field(str, None, nullable=True),
    "dataset": {
        "source": Field(str, "synthetic", choices=("synthetic", "cifar10")),
        "class_count": Field(int, 4, minimum=2),
        "per_class": Field(int, 100, minimum=1),
        "test_per_class": Field(int, 50, minimum=1),
        "side": Field(int, 16, minimum=8),
        "noise_sigma": Field(float, 0.05, minimum=0.0),
        "contrast": Field(float, 1.0, minimum=0.0, exclusive=True, maximum=1.0),
        "train_path": Field(str, None, nullable=True),
        "test_path": Field(str, None, nullable=True),
        "test_fraction": Field(float, 0.2, minimum=0.0, exclusive=True),
        "limit": Field(int, 0, minimum=0),
    },
    "net": dict(TRAIN_SCHEMA),
    "robust": dict(TRAIN_SCHEMA, **{
        "alpha": Field(float, 0.1, minimum=0.0),
        "epsilon": Field(float, 0.3, minimum=0.0),
        "steps": Field(int, 10, minimum=1),
        "norm": Field(str, "l2", choices=("l2", "linf")),
        "init": Field(str, "baseline", choices=("random", "baseline")),
    }),
    "srd": {
        "psi_max": Field(int, 6, minimum=2),
        "atoms": Field(int, 16, minimum=1),
        "filter_size": Field(int, 5, minimum=1),
        "lambda_l1": Field(float, 0.05, minimum=0.0),
        "outer_iters": Field(int, 10, minimum=1),
        "admm_iters": Field(int, 50, minimum=1),
        "max_images": Field(int, 0, minimum=0),
        "elbow_sharpness": Field(float, 5.0, minimum=1.0),
    },
    "purify": {
        "tikhonov_lambda": Field(float, 5.0, minimum=0.0),
        "lambda_l1": Field(float, 0.05, minimum=0.0),
        "rho": Field(float, None, minimum=0.0, exclusive=True, nullable=True),
        "max_iters": Field(int, 200, minimum=1),
        "tol": Field(float, 1e-4, minimum=0.0, exclusive=True),
        "rho_adapt": Field(bool, True),
    },
    "attacks": [
        {"method": "fgsm", "norm": "l2", "epsilon": 0.04},
        {"method": "fgsm", "norm": "l2", "epsilon": 0.08},
        {"method": "bim", "norm": "l2", "epsilon": 0.04, "steps": 100},
    ],
    "eval": {
        "purify": Field(bool, True),
        "targets": Field(list, ["baseline"]),
    },
}


def _validate_attack(path: str, entry) -> dict:
    if not isinstance(entry, dict):
        raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"{path} must be an object")
    unknown = sorted(set(entry) - set(ATTACK_SCHEMA))
    if unknown:
        raise PurikitError.fromPair(CONFIG_UNKNOWN_KEY, f"{path}.{unknown[0]}")
    out = {}
    for key, field in ATTACK_SCHEMA.items():
        if key not in entry and field.default is None and not field.nullable:
            raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"{path}.{key} is required")
        out[key] = field.validate(f"{path}.{key}", entry.get(key, field.default))
    return out


def _validate_section(name: str, schema: dict, values) -> dict:
    if not isinstance(values, dict):
        raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"{name} must be an object")
    unknown = sorted(set(values) - set(schema))
    if unknown:
        raise PurikitError.fromPair(CONFIG_UNKNOWN_KEY, f"{name}.{unknown[0]}")
    return {
        key: field.validate(f"{name}.{key}", copy.deepcopy(values.get(key, field.default)))
        for key, field in schema.items()
    }


def validate(doc: dict) -> dict:
    """Total validation: every key known, typed and in bounds. Returns the
    document with defaults filled in."""
    if not isinstance(doc, dict):
        raise PurikitError.fromPair(CONFIG_BAD_VALUE, "config must be a JSON object")
    unknown = sorted(set(doc) - set(SCHEMA))
    if unknown:
        raise PurikitError.fromPair(CONFIG_UNKNOWN_KEY, unknown[0])

    out = {}
    for name, schema in SCHEMA.items():
        if isinstance(schema, Field):
            out[name] = schema.validate(name, doc.get(name, schema.default))
        elif name == "attacks":
            entries = doc.get("attacks", schema)
            if not isinstance(entries, list):
                raise PurikitError.fromPair(CONFIG_BAD_VALUE, "attacks must be a list")
            out[name] = [_validate_attack(f"attacks[{i}]", entry) for i, entry in enumerate(entries)]
        else:
            out[name] = _validate_section(name, schema, doc.get(name, {}))

    targets = out["eval"]["targets"]
    if not targets or any(t not in ("baseline", "robust") for t in targets):
        raise PurikitError.fromPair(
            CONFIG_BAD_VALUE, f"eval.targets must be a non-empty list of baseline/robust, got {targets!r}")
    dataset = out["dataset"]
    if dataset["source"] == "cifar10":
        if not dataset["train_path"]:
            raise PurikitError.fromPair(CONFIG_BAD_VALUE, "dataset.train_path is required for cifar10")
        for key in ("train_path", "test_path"):
            if dataset[key] and not os.path.exists(dataset[key]):
                raise PurikitError.fromPair(MISSING_ARTIFACT, f"dataset.{key} {dataset[key]}")
        if dataset["test_fraction"] >= 1.0:
            raise PurikitError.fromPair(CONFIG_BAD_VALUE, "dataset.test_fraction must be < 1")
    return out


def parse_override(text: str) -> tuple:
    """'section.key=value' with value read as JSON, else as a bare string"""
    if "=" not in text:
        raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"override '{text}' is not key=value")
    (path, raw) = text.split("=", 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return (path.strip(), value)


def apply_override(doc: dict, path: str, value):
    parts = path.split(".")
    if parts[0] not in SCHEMA:
        raise PurikitError.fromPair(CONFIG_UNKNOWN_KEY, path)
    if len(parts) == 1:
        doc[parts[0]] = value
        return
    section = SCHEMA[parts[0]]
    if len(parts) != 2 or not isinstance(section, dict) or parts[1] not in section:
        raise PurikitError.fromPair(CONFIG_UNKNOWN_KEY, path)
    doc.setdefault(parts[0], {})[parts[1]] = value


class RunConfig(Object):
    def __init__(self, values: dict):
        self.values = values

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def threads(self) -> int:
        return self.values["threads"]

    def section(self, name: str) -> dict:
        return self.values[name]

    def stageSeed(self, stage: str, index: int = 0) -> int:
        return self.seed + STAGE_OFFSETS[stage] + index

    def outDir(self) -> str:
        return self.values["out"] or os.environ.get(OUT_ENV_VAR) or DEFAULT_OUT

    def trainConfig(self) -> TrainConfig:
        net = self.values["net"]
        return TrainConfig(
            net["epochs"], net["batch_size"], net["learning_rate"], net["weight_decay"],
            self.stageSeed("baseline"))

    def robustConfig(self) -> RobustTrainConfig:
        robust = self.values["robust"]
        seed = self.stageSeed("robust")
        inner = AttackConfig(AttackMethod.PGD, robust["norm"], robust["epsilon"], robust["steps"], seed=seed)
        return RobustTrainConfig(
            alpha=robust["alpha"], inner_attack=inner, init=robust["init"],
            epochs=robust["epochs"], batch_size=robust["batch_size"],
            learning_rate=robust["learning_rate"], weight_decay=robust["weight_decay"], seed=seed)

    def srdConfig(self) -> SrdConfig:
        srd = self.values["srd"]
        purify = self.values["purify"]
        admm = AdmmConfig(None, srd["admm_iters"], purify["tol"], purify["tol"], purify["rho_adapt"])
        return SrdConfig(
            srd["psi_max"], srd["atoms"], srd["filter_size"], srd["lambda_l1"], srd["outer_iters"],
            srd["max_images"], srd["elbow_sharpness"], admm, self.stageSeed("srd"), self.tikhonovConfig())

    def tikhonovConfig(self) -> TikhonovConfig:
        return TikhonovConfig(self.values["purify"]["tikhonov_lambda"])

    def cbpdnConfig(self) -> CbpdnConfig:
        purify = self.values["purify"]
        admm = AdmmConfig(purify["rho"], purify["max_iters"], purify["tol"], purify["tol"], purify["rho_adapt"])
        return CbpdnConfig(purify["lambda_l1"], admm)

    def attackConfigs(self) -> list:
        return [
            AttackConfig(
                entry["method"], NormKind.L2 if entry["norm"] == "l2" else NormKind.LINF,
                entry["epsilon"], entry["steps"], entry["step_size"], self.stageSeed("attack", index))
            for index, entry in enumerate(self.values["attacks"])
        ]

    def toJson(self) -> str:
        return json.dumps(self.values, indent=2, sort_keys=True)

    def __str__(self):
        return "RunConfig seed: %d, threads: %d, out: %s" % (self.seed, self.threads, self.outDir())


def load_config(path: str = None, overrides=()) -> RunConfig:
    doc = {}
    if path:
        if not os.path.exists(path):
            raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"config file {path} does not exist")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except ValueError as ex:
                raise PurikitError.fromPair(CONFIG_BAD_VALUE, f"{path}: {ex}")
    for override in overrides:
        if isinstance(override, str):
            override = parse_override(override)
        apply_override(doc, *override)
    config = RunConfig(validate(doc))
    logger.debug("load_config: %s", config)
    return config
