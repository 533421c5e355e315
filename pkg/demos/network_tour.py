"""
The enhancement network: shapes, budget, ablations
==================================================
"""
import numpy as np

from aquanet import ABLATIONS, AquaNetConfig, aquanet_forward, count_flops, count_params, init_params
from aquanet.tensor import Tensor

cfg = AquaNetConfig()
p = init_params(cfg, seed=0)
print("default width", cfg.base_channels, "->", count_params(p), "parameters")
print("GFLOPs at 128x128: %.3f" % (count_flops(cfg, 128, 128) / 1e9))

x = Tensor(np.random.default_rng(0).uniform(-1, 1, (1, 3, 64, 64)).astype(np.float32))
res = aquanet_forward(x, p, cfg)
print("output", res.output.shape, "illumination", res.illumination.shape, "correction", res.correction.shape)

# %% the four ablation rows, smaller width so this runs fast
for name in ABLATIONS:
    c = AquaNetConfig.for_ablation(name, base_channels=8)
    q = init_params(c, seed=0)
    out = aquanet_forward(x, q, c).output.data
    print(f"{name:11s} params {count_params(q):7d}  output mean {out.mean():+.4f}")
