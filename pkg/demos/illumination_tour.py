"""
Illumination map
================

The map multiplies decoder skips, so it has to stay strictly inside (0, 2)
whatever the coefficient network emits.
"""
import numpy as np

from aquanet.illumination import IlluminationParams, illumination_map, predict_coefficients
from aquanet.tensor import Tensor

grid = np.array([-50.0, -2.0, 0.0, 2.0, 50.0])
a, b = np.meshgrid(grid, grid, indexing="ij")
L = illumination_map(Tensor(a[None, None]), Tensor(b[None, None])).data[0, 0]
print("alpha down, beta across")
print(np.array2string(L, precision=4, suppress_small=False))
print("L(0, 0) =", L[2, 2])  # sigmoid(0) * (1 + tanh(0))

# even saturated inputs stay off the boundaries
ext = illumination_map(Tensor(np.array([[[[-1e6]]]])), Tensor(np.array([[[[1e6]]]]))).data
print("saturated corner:", ext.ravel(), ext.ravel() > 0)

# %% the predictor on an actual image
p = IlluminationParams.init(seed=3, dtype=np.float32)
img = Tensor(np.random.default_rng(3).uniform(-1, 1, (1, 3, 64, 64)).astype(np.float32))
L = illumination_map(*predict_coefficients(img, p))
print("map range on a random image: [%.4f, %.4f]" % (L.data.min(), L.data.max()))
