"""L1 / SGD training, evaluation and single-image inference."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from . import ops
from .backbone import DEFAULT_BASE_CHANNELS, AquaNetConfig, aquanet_forward, init_params
from .errors import ContractViolation, ImageDecodeError, NonFiniteError
from .io import (DatasetManifest, atomic_write, from_model_range, load_image, load_pairs,
                 save_checkpoint)
from .metrics import ALL_METRICS, metric_report
from .tensor import Tape, Tensor, backward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch: int = 8
    epochs: int = 100
    input_size: int = 128
    seed: int = 0
    loss: str = "l1"
    ablation: str = "full"
    base_channels: int = DEFAULT_BASE_CHANNELS
    checkpoint_every: int = 10

    def model_config(self) -> AquaNetConfig:
        return AquaNetConfig.for_ablation(self.ablation, base_channels=self.base_channels,
                                          input_size=self.input_size)


@dataclass
class TrainLog:
    steps: List[tuple] = field(default_factory=list)  # (step, epoch, loss, seconds)
    epoch_means: List[float] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)

    @property
    def losses(self):
        return [row[2] for row in self.steps]

    def write_csv(self, path):
        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "epoch", "loss", "seconds"])
            for step, epoch, loss, secs in self.steps:
                w.writerow([step, epoch, repr(loss), f"{secs:.3f}"])
        atomic_write(path, write, binary=False)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error over every element."""
    if pred.shape != target.shape:
        raise ContractViolation(f"l1_loss: shapes differ {pred.shape} vs {target.shape}")
    return ops.mean(ops.absolute(ops.sub(pred, target)))


def sgd_step(params, lr):
    """Plain SGD, ``w <- w - lr * g``, then zero the gradients.

    Every gradient is checked before anything is updated, so a non-finite
    gradient leaves the parameters untouched.
    """
    items = params.params() if hasattr(params, "params") else list(params)
    for p in items:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteError("sgd_step", f"gradient of {p.name}")
    for p in items:
        p.data -= lr * p.grad
        p.zero_grad()
    return params


def _as_arrays(data, size, dtype):
    if isinstance(data, DatasetManifest):
        return load_pairs(data, size, dtype)
    raw, ref = data
    raw, ref = np.asarray(raw, dtype=dtype), np.asarray(ref, dtype=dtype)
    if raw.shape != ref.shape:
        raise ContractViolation(f"raw {raw.shape} and reference {ref.shape} differ")
    return raw, ref


def train(config: TrainConfig, data, out_dir=None, params=None, dtype=np.float32):
    """Train from ``data`` (a manifest, or a ``(raw, reference)`` pair of NCHW arrays in [-1, 1]).

    Returns ``(params, log)``. Batches follow a per-epoch permutation drawn
    from a Philox stream seeded with ``config.seed``; the last partial batch
    is kept. With ``out_dir`` set, checkpoints are written every
    ``checkpoint_every`` epochs and at the end, plus ``train_log.csv``.
    """
    if config.loss != "l1":
        raise ContractViolation(f"unsupported loss {config.loss!r}")
    model_cfg = config.model_config()
    raw, ref = _as_arrays(data, config.input_size, dtype)
    if params is None:
        params = init_params(model_cfg, config.seed, dtype)
    out_dir = Path(out_dir) if out_dir is not None else None
    tlog = TrainLog()
    n = raw.shape[0]
    if n == 0:
        raise ContractViolation("training needs at least one image pair")
    rng = np.random.Generator(np.random.Philox(config.seed))
    start = time.perf_counter()
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, config.batch):
            idx = order[lo:lo + config.batch]
            with Tape() as tape:
                out = aquanet_forward(Tensor(raw[idx]), params, model_cfg).output
                loss = l1_loss(out, Tensor(ref[idx]))
            backward(tape, loss)
            sgd_step(params, config.lr)
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteError("l1_loss", f"step {step}")
            tlog.steps.append((step, epoch, value, time.perf_counter() - start))
            losses.append(value)
            step += 1
        tlog.epoch_means.append(float(np.mean(losses)))
        log.info("epoch %d mean L1 %.5f", epoch, tlog.epoch_means[-1])
        if out_dir is not None and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            path = out_dir / f"epoch_{epoch + 1:04d}.aqnt"
            save_checkpoint(params, path)
            tlog.checkpoints.append(path)
    if out_dir is not None:
        final = out_dir / "final.aqnt"
        save_checkpoint(params, final)
        tlog.checkpoints.append(final)
        tlog.write_csv(out_dir / "train_log.csv")
    return params, tlog


# --------------------------------------------------------------- inference

def pad_to_multiple(img, multiple=8):
    h, w = img.shape[:2]
    ph, pw = (-h) % multiple, (-w) % multiple
    if ph == 0 and pw == 0:
        return img
    mode = "reflect" if (ph < h and pw < w) else "edge"
    return np.pad(img, ((0, ph), (0, pw), (0, 0)), mode=mode)


def enhance_image(params, config: AquaNetConfig, img, return_maps=False):
    """Enhance an (h, w, 3) uint8 image of any size; output has the same size."""
    h, w = img.shape[:2]
    padded = pad_to_multiple(np.asarray(img))
    dtype = params.head.weight.dtype
    x = Tensor((padded.astype(np.float64) / 127.5 - 1.0).transpose(2, 0, 1)[None].astype(dtype))
    res = aquanet_forward(x, params, config)
    out = from_model_range(res.output)[:h, :w]
    if return_maps:
        return out, res.illumination.data[0, 0, :h, :w], res.correction.data[0, :, :h, :w]
    return out


# -------------------------------------------------------------- evaluation

@dataclass
class EvalResult:
    rows: List[dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    columns: List[str] = field(default_factory=list)

    @property
    def means(self):
        return {c: float(np.mean([r[c] for r in self.rows])) for c in self.columns if self.rows}

    def write_csv(self, path):
        def fmt(v):
            return "inf" if v == math.inf else repr(float(v))

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["image", *self.columns])
            for r in self.rows:
                w.writerow([r["image"], *(fmt(r[c]) for c in self.columns)])
            if self.rows:
                means = self.means
                w.writerow(["mean", *(fmt(means[c]) for c in self.columns)])
        atomic_write(path, write, binary=False)


def evaluate(params, config: AquaNetConfig, manifest: DatasetManifest, metrics=ALL_METRICS):
    """Enhance every raw image at native size and score it.

    PSNR/SSIM are only computed when the dataset has references.
    """
    with_ref = manifest.has_reference
    columns = [m for m in metrics if with_ref or m not in ("psnr", "ssim")]
    result = EvalResult(columns=columns)
    if not with_ref and len(columns) < len(metrics):
        result.notes.append("no reference images: psnr/ssim skipped")
    for raw_path, ref_path in manifest.pairs:
        try:
            raw = load_image(raw_path)
            ref = load_image(ref_path) if ref_path is not None else None
        except ImageDecodeError as exc:
            result.notes.append(f"skipped {raw_path.name}: {exc}")
            continue
        enhanced = enhance_image(params, config, raw)
        row = {"image": raw_path.name}
        row.update(metric_report(enhanced, ref, columns))
        result.rows.append(row)
    return result
