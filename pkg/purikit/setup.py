"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""
from setuptools import setup
from purikit import get_version_string

import sys

if sys.version_info < (3, 9):
    sys.exit("Only Python 3.9 and greater is supported")

setup(
    name="purikit",
    version=get_version_string(),
    packages=["purikit"],
    install_requires=["numpy>=1.24", "scipy>=1.10", "scikit-learn>=1.2"],
    entry_points={"console_scripts": ["purikit = purikit.cli:main"]},
    license="MIT",
    author="The purikit authors",
    description="Latent-clustered sparse-code purification against adversarial images",
)
