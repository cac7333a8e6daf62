"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

""" Package implementing latent-clustered sparse-code purification of adversarial images """

VERSION = {"major": 0, "minor": 3, "micro": 1}


def get_version_string():
    # Version string with preserved leading zeros
    return "0.03.01"


__version__ = get_version_string()
