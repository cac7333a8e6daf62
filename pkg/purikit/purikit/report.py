"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Evaluation report rendering.

report.txt      fixed-width table, one row per (target, condition)
records.jsonl   one JSON object per sample and condition, keys sorted:
                target, condition, index, label, prediction,
                purified_prediction, class_id, cluster_index, md, converged
                (the last five are null when purification was off)

Neither file carries timestamps or runtimes.
"""

import json
import logging
import os

from purikit.bundle import plain_value
from purikit.object_implem import Object
from purikit.utils import floatMaxString

logger = logging.getLogger(__name__)

REPORT_FILE = "report.txt"
RECORDS_FILE = "records.jsonl"


class ReportRow(Object):
    def __init__(self, target: str, condition: str, samples: int, accuracy: float, purified_accuracy: float = None):
        self.target = target
        self.condition = condition
        self.samples = samples
        self.accuracy = accuracy
        self.purified_accuracy = purified_accuracy

    def __str__(self):
        return "%s %s n=%d accuracy: %s purified: %s" % (
            self.target, self.condition, self.samples, floatMaxString(self.accuracy),
            floatMaxString(self.purified_accuracy) or "-")


class SampleRecord(Object):
    def __init__(
        self, target, condition, index, label, prediction, purified_prediction=None,
        class_id=None, cluster_index=None, md=None, converged=None,
    ):
        self.target = target
        self.condition = condition
        self.index = index
        self.label = label
        self.prediction = prediction
        self.purified_prediction = purified_prediction
        self.class_id = class_id
        self.cluster_index = cluster_index
        self.md = md
        self.converged = converged

    def toDict(self) -> dict:
        return dict(vars(self))

    def __str__(self):
        return str(self.toDict())


class EvaluationReport(Object):
    def __init__(self):
        self.rows = []
        self.records = []
        self.runtime = {}

    def merge(self, other: "EvaluationReport"):
        self.rows.extend(other.rows)
        self.records.extend(other.records)
        self.runtime.update(other.runtime)

    def row(self, target: str, condition: str) -> ReportRow:
        for row in self.rows:
            if row.target == target and row.condition == condition:
                return row
        raise KeyError((target, condition))

    def renderTable(self) -> str:
        header = ("target", "condition", "samples", "accuracy", "purified")
        lines = [header] + [
            (row.target, row.condition, str(row.samples), floatMaxString(row.accuracy),
             floatMaxString(row.purified_accuracy) or "-")
            for row in self.rows
        ]
        widths = [max(len(line[col]) for line in lines) for col in range(len(header))]
        text = ["purikit evaluation report"]
        for line in lines:
            text.append("  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip())
        return "\n".join(text) + "\n"

    def renderRecords(self) -> str:
        return "".join(json.dumps(plain_value(record.toDict()), sort_keys=True) + "\n" for record in self.records)

    def __str__(self):
        return "EvaluationReport rows: %d, records: %d" % (len(self.rows), len(self.records))


def write_report(report: EvaluationReport, out_dir: str) -> tuple:
    tablePath = os.path.join(out_dir, REPORT_FILE)
    recordsPath = os.path.join(out_dir, RECORDS_FILE)
    with open(tablePath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.renderTable())
    with open(recordsPath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.renderRecords())
    logger.info("report written to %s and %s", tablePath, recordsPath)
    return (tablePath, recordsPath)
