"""
A few minutes of training on synthetic pairs
============================================

Synthetic "underwater" pairs (blue-green cast plus haze) stand in for a
real corpus. Narrow model, 32x32 crops, so it finishes quickly on a CPU.
"""
import numpy as np

from aquanet import io
from aquanet.metrics import psnr
from aquanet.synthetic import synthetic_pairs
from aquanet.training import TrainConfig, enhance_image, train

raws, refs = synthetic_pairs(4, 32, seed=7)
cfg = TrainConfig(lr=0.01, batch=4, epochs=150, input_size=32, seed=7, base_channels=8)
to = lambda imgs: np.stack([io.to_model_range(i).data[0] for i in imgs])
params, log = train(cfg, (to(raws), to(refs)))

for step, _, loss, _ in log.steps[::25] + log.steps[-1:]:
    print(f"step {step:4d}  L1 {loss:.4f}")

mc = cfg.model_config()
before = np.mean([psnr(r, t) for r, t in zip(raws, refs)])
after = np.mean([psnr(enhance_image(params, mc, r), t) for r, t in zip(raws, refs)])
print(f"PSNR raw vs reference {before:.2f} dB, enhanced vs reference {after:.2f} dB")
