"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import numpy as np

# H x W x C float64 array with intensities in [0, 1]
Image = np.ndarray
# N x H x W x C stack of images
ImageStack = np.ndarray
# N x k latent vectors
LatentBatch = np.ndarray

ClusterKey = tuple  # (class_id, cluster_index)
ClusterLookup = dict  # sample id -> ClusterDistribution
