"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Diagnostic codes raised by the pipeline. Every code belongs to a category and
the category decides the command line exit status.
"""

# categories
CATEGORY_INTERNAL = "internal"
CATEGORY_CONFIG = "config"
CATEGORY_DEPENDENCY = "dependency"
CATEGORY_ARTIFACT = "artifact"
CATEGORY_DATA = "data"
CATEGORY_NUMERIC = "numeric"

EXIT_STATUS = {
    CATEGORY_INTERNAL: 1,
    CATEGORY_CONFIG: 2,
    CATEGORY_DEPENDENCY: 3,
    CATEGORY_ARTIFACT: 4,
    CATEGORY_DATA: 5,
    CATEGORY_NUMERIC: 6,
}


class CodeMsgPair:
    def __init__(self, code, msg, category=CATEGORY_INTERNAL):
        self.errorCode = code
        self.errorMsg = msg
        self.errorCategory = category

    def code(self):
        return self.errorCode

    def msg(self):
        return self.errorMsg

    def category(self):
        return self.errorCategory

    def exitStatus(self):
        return EXIT_STATUS[self.errorCategory]


INVALID_ARGUMENT = CodeMsgPair(601, "Invalid argument - ", CATEGORY_NUMERIC)
SHAPE_MISMATCH = CodeMsgPair(602, "Shape mismatch - ", CATEGORY_NUMERIC)
EMPTY_INPUT = CodeMsgPair(603, "Empty input - ", CATEGORY_NUMERIC)
CLUSTER_COUNT = CodeMsgPair(604, "Cluster count exceeds distinct points - ", CATEGORY_NUMERIC)
TOO_FEW_MEMBERS = CodeMsgPair(605, "Too few cluster members - ", CATEGORY_NUMERIC)
NEGATIVE_QUADRATIC_FORM = CodeMsgPair(606, "Negative Mahalanobis quadratic form - ", CATEGORY_NUMERIC)
MISSING_CLUSTER = CodeMsgPair(607, "Missing cluster association for sample - ", CATEGORY_NUMERIC)
EMPTY_SRD = CodeMsgPair(608, "Semantic reconstruction dictionary is empty", CATEGORY_NUMERIC)
NON_MONOTONE_WCSS = CodeMsgPair(609, "Within-cluster sum of squares increased - ", CATEGORY_NUMERIC)
NOT_CONVERGED = CodeMsgPair(610, "Sparse coding did not converge - ", CATEGORY_NUMERIC)
BAD_IMAGE = CodeMsgPair(501, "Invalid image - ", CATEGORY_DATA)
CIFAR_TRUNCATED = CodeMsgPair(502, "Truncated CIFAR-10 record at byte offset ", CATEGORY_DATA)
TOO_MANY_CLASSES = CodeMsgPair(503, "Not enough synthetic shape families - ", CATEGORY_DATA)
BAD_BUNDLE_MAGIC = CodeMsgPair(401, "Not an artifact bundle - ", CATEGORY_ARTIFACT)
UNKNOWN_BUNDLE_VERSION = CodeMsgPair(402, "Unknown bundle format version - ", CATEGORY_ARTIFACT)
BUNDLE_CHECKSUM = CodeMsgPair(403, "Bundle payload checksum mismatch - ", CATEGORY_ARTIFACT)
BUNDLE_SHAPE = CodeMsgPair(404, "Bundle shape and payload disagree - ", CATEGORY_ARTIFACT)
MISSING_ARTIFACT = CodeMsgPair(301, "Missing upstream artifact - ", CATEGORY_DEPENDENCY)
CONFIG_UNKNOWN_KEY = CodeMsgPair(201, "Unknown config key - ", CATEGORY_CONFIG)
CONFIG_BAD_VALUE = CodeMsgPair(202, "Invalid config value - ", CATEGORY_CONFIG)
