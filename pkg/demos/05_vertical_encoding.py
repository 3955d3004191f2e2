"""Vertical encoding on a toy feature volume, against the single-value baseline."""

import numpy as np

from radarcctp.ve import (DenseFeatureMap, VerticalEncoderParams, grad_check, sve_baseline,
                          ve_step1_attend, vertical_encode)

fm = DenseFeatureMap.random(64, 8, 4, 4, seed=1)
params = VerticalEncoderParams.init(64, n_heads=2, seed=0)

compressed, scores = ve_step1_attend(fm, params)
print("compressed", compressed.shape, "scores", scores.shape)
print("column (0, 0) attention per head:")
for h in range(scores.shape[0]):
    print("  ", np.round(scores[h, :, 0, 0], 3))

print("BEV after stride-2 reshape:", vertical_encode(fm, params, 2).shape)
print("max-over-height baseline:", sve_baseline(fm).shape)

small = DenseFeatureMap.random(16, 4, 2, 2, seed=2)
res = grad_check(VerticalEncoderParams.init(16, 2, seed=3), small)
print(f"gradient check max relative error {res.max_rel_error:.2e}")
