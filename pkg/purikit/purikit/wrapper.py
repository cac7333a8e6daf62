"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

This is the interface the pipeline stages report progress through. The default
implementation logs every callback; subclass it to capture telemetry.
"""

import logging

from purikit.utils import current_fn_name, log_

logger = logging.getLogger(__name__)


def logAnswer(fnName, fnParams):
    log_(fnName, fnParams, "ANSWER")


class PipelineWrapper:
    def __init__(self):
        pass

    def warning(self, code: int, text: str):
        """A recoverable condition: lowered cluster count, merged cluster,
        non-converged solver."""
        logAnswer(current_fn_name(), vars())
        logger.warning("WARNING %s %s", code, text)

    def error(self, code: int, text: str):
        logAnswer(current_fn_name(), vars())
        logger.error("ERROR %s %s", code, text)

    def epochEnd(self, stage: str, epoch: int, loss: float, accuracy: float, meanMd: float = None):
        """Called after every training epoch. meanMd is only set by robust training."""
        logAnswer(current_fn_name(), vars())

    def sparseCodingEnd(self, images: int, iterations: int, converged: int, rho: float):
        logAnswer(current_fn_name(), vars())

    def dictionaryIteration(self, outer: int, objective: float, relError: float, maxAtomNorm: float):
        logAnswer(current_fn_name(), vars())

    def clusterCountSelected(self, classId: int, psiStar: int, wcssCurve: list):
        logAnswer(current_fn_name(), vars())

    def clusterMerged(self, classId: int, fromCluster: int, intoCluster: int, members: int):
        logAnswer(current_fn_name(), vars())

    def purifyEnd(self, index: int, classId: int, clusterIndex: int, md: float, converged: bool):
        logAnswer(current_fn_name(), vars())

    def stageEnd(self, stage: str, artifact: str):
        logAnswer(current_fn_name(), vars())
