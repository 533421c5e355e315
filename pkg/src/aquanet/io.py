"""Images, datasets, checkpoints and run configuration on disk."""
from __future__ import annotations

import dataclasses
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from .backbone import DEFAULT_BASE_CHANNELS, AquaNetConfig
from .errors import (CheckpointFormatError, ConfigError, ConfigIncompatibleError,
                     ContractViolation, ImageDecodeError, ManifestError)
from .ops import bilinear_matrix
from .tensor import Tensor

# ------------------------------------------------------------------ images

IMAGE_SUFFIXES = (".png",)


def load_image(path) -> np.ndarray:
    """Decode an 8-bit grey or RGB(A) PNG into an (h, w, 3) uint8 array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.format != "PNG":
                raise ImageDecodeError(path, f"not a PNG ({im.format})")
            mode = im.mode
            if mode in ("I;16", "I;16B", "I", "F"):
                raise ImageDecodeError(path, f"unsupported bit depth (mode {mode})")
            if mode in ("L", "LA", "P", "1"):
                im = im.convert("L")
                arr = np.asarray(im, dtype=np.uint8)
                return np.repeat(arr[..., None], 3, axis=2)
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except ImageDecodeError:
        raise
    except (OSError, ValueError, SyntaxError) as exc:
        raise ImageDecodeError(path, str(exc)) from exc


def atomic_write(path, write_fn, binary=True):
    """Write through a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=path.parent)
    try:
        with os.fdopen(fd, "wb" if binary else "w") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ContractViolation(f"save_image expects (h, w, 3) uint8, got {img.shape} {img.dtype}")
    atomic_write(path, lambda fh: Image.fromarray(img, "RGB").save(fh, format="PNG"))


def save_gray(path, img):
    atomic_write(path, lambda fh: Image.fromarray(np.asarray(img, np.uint8), "L").save(fh, format="PNG"))


def resize_image(img, h, w):
    """Bilinear (half-pixel centres) resize of an (H, W, C) array; returns float64."""
    src = np.asarray(img, dtype=np.float64)
    if src.shape[:2] == (h, w):
        return src
    ah = bilinear_matrix(src.shape[0], h)
    aw = bilinear_matrix(src.shape[1], w)
    return np.einsum("oh,hwc,pw->opc", ah, src, aw)


def to_model_range(img, size=None, dtype=np.float32) -> Tensor:
    """uint8 (h, w, 3) -> (1, 3, size, size) tensor in [-1, 1]."""
    img = np.asarray(img)
    if size is not None:
        if size % 8:
            raise ContractViolation(f"model input size must be a multiple of 8, got {size}")
        arr = resize_image(img, size, size)
    else:
        arr = img.astype(np.float64)
    return Tensor((arr / 127.5 - 1.0).transpose(2, 0, 1)[None].astype(dtype))


def from_model_range(t) -> np.ndarray:
    """(1, 3, h, w) or (3, h, w) tensor in [-1, 1] -> uint8 (h, w, 3); clamps, rounds half up."""
    d = t.data if isinstance(t, Tensor) else np.asarray(t)
    if d.ndim == 4:
        if d.shape[0] != 1:
            raise ContractViolation("from_model_range converts one image at a time")
        d = d[0]
    v = (np.clip(d.astype(np.float64), -1.0, 1.0) + 1.0) * 127.5
    return np.floor(v + 0.5).astype(np.uint8).transpose(1, 2, 0).copy()


# ---------------------------------------------------------------- datasets

@dataclass
class DatasetManifest:
    root: Path
    pairs: List[Tuple[Path, Optional[Path]]] = field(default_factory=list)

    @property
    def has_reference(self):
        return bool(self.pairs) and all(ref is not None for _, ref in self.pairs)

    def __len__(self):
        return len(self.pairs)


def _list_images(d):
    return sorted(p for p in Path(d).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def build_manifest(root, require_reference=False) -> DatasetManifest:
    """Pair ``root/raw/*.png`` with identically named files in ``root/reference/``."""
    root = Path(root)
    raw_dir, ref_dir = root / "raw", root / "reference"
    if not raw_dir.is_dir():
        raise ManifestError(f"{raw_dir} does not exist")
    raws = _list_images(raw_dir)
    if not ref_dir.is_dir():
        if require_reference:
            raise ManifestError(f"{ref_dir} does not exist but reference images are required")
        return DatasetManifest(root, [(p, None) for p in raws])
    refs = {p.name: p for p in _list_images(ref_dir)}
    raw_names = {p.name for p in raws}
    missing = sorted(raw_names - set(refs))
    extra = sorted(set(refs) - raw_names)
    if missing or extra:
        raise ManifestError(f"raw/reference mismatch: missing references {missing}, unmatched references {extra}")
    return DatasetManifest(root, [(p, refs[p.name]) for p in raws])


def load_pairs(manifest: DatasetManifest, size, dtype=np.float32):
    """Stack all pairs as (N, 3, size, size) arrays in [-1, 1]."""
    if not manifest.has_reference:
        raise ManifestError(f"{manifest.root}: every raw image needs a reference for training")
    raws = [to_model_range(load_image(r), size, dtype).data[0] for r, _ in manifest.pairs]
    refs = [to_model_range(load_image(t), size, dtype).data[0] for _, t in manifest.pairs]
    return np.stack(raws), np.stack(refs)


# ------------------------------------------------------------- checkpoints

MAGIC = b"AQNT"
FORMAT_VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def encode_checkpoint(arrays) -> bytes:
    """Serialise a name -> array mapping (insertion order is kept)."""
    out = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        tag = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}.get(arr.dtype)
        if tag is None:
            raise ContractViolation(f"{name}: unsupported dtype {arr.dtype}")
        raw_name = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw_name)) + raw_name)
        out.append(struct.pack("<BB", tag, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=DTYPE_TAGS[tag]).tobytes())
    return b"".join(out)


def decode_checkpoint(buf: bytes) -> dict:
    view = memoryview(buf)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointFormatError("checkpoint is truncated")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointFormatError("bad magic, not an AQNT checkpoint")
    version, count = struct.unpack("<HI", take(6))
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        try:
            name = bytes(take(nlen)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError("entry name is not UTF-8") from exc
        tag, ndim = struct.unpack("<BB", take(2))
        if tag not in DTYPE_TAGS:
            raise CheckpointFormatError(f"{name}: unknown dtype tag {tag}")
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        dt = DTYPE_TAGS[tag]
        n = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(dims)
        if name in arrays:
            raise CheckpointFormatError(f"duplicate entry {name!r}")
        arrays[name] = arr.astype(dt.newbyteorder("="), copy=True)
    if pos != len(view):
        raise CheckpointFormatError("trailing bytes after last entry")
    return arrays


def save_checkpoint(params, path):
    """``params`` is an AquaNetParams or a name -> array mapping."""
    arrays = ({p.name: p.data for p in params.params()} if hasattr(params, "params") else dict(params))
    blob = encode_checkpoint(arrays)
    atomic_write(path, lambda fh: fh.write(blob))


def load_checkpoint(path, config=None):
    """Raw name -> array dict, or AquaNetParams when ``config`` is given."""
    arrays = decode_checkpoint(Path(path).read_bytes())
    if config is None:
        return arrays
    return params_from_arrays(arrays, config)


def params_from_arrays(arrays, config):
    from .backbone import init_params

    first = next(iter(arrays.values()), None)
    dtype = first.dtype if first is not None else np.float32
    params = init_params(config, seed=0, dtype=dtype)
    named = params.named()
    missing, extra = set(named) - set(arrays), set(arrays) - set(named)
    if missing or extra:
        raise ConfigIncompatibleError(missing, extra)
    for name, p in named.items():
        if arrays[name].shape != p.shape:
            raise ConfigIncompatibleError({f"{name}{p.shape}"}, {f"{name}{arrays[name].shape}"})
        p.data = np.array(arrays[name], copy=True)
        p.zero_grad()
    return params


# ------------------------------------------------------------- run config

@dataclass
class RunConfig:
    lr: float = 0.001
    batch: int = 8
    epochs: int = 100
    input_size: int = 128
    seed: int = 0
    loss: str = "l1"
    ablation: str = "full"
    base_channels: int = DEFAULT_BASE_CHANNELS
    checkpoint_every: int = 10
    data_root: str = ""
    out_dir: str = "runs/aquanet"

    def model_config(self) -> AquaNetConfig:
        return AquaNetConfig.for_ablation(self.ablation, base_channels=self.base_channels,
                                          input_size=self.input_size)

    def train_config(self):
        from .training import TrainConfig

        return TrainConfig(lr=self.lr, batch=self.batch, epochs=self.epochs, input_size=self.input_size,
                           seed=self.seed, loss=self.loss, ablation=self.ablation,
                           base_channels=self.base_channels, checkpoint_every=self.checkpoint_every)


def _parse_value(raw, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    return type(default)(raw)


def parse_run_config(text) -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    defaults = RunConfig()
    known = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(raw, known[key])
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None
    return dataclasses.replace(defaults, **values)


def load_run_config(path) -> RunConfig:
    return parse_run_config(Path(path).read_text())


def format_run_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in dataclasses.fields(cfg))


def infer_model_config(arrays) -> AquaNetConfig:
    """Recover width and branch flags from the entry names/shapes of a checkpoint."""
    if "stem.weight" not in arrays:
        raise CheckpointFormatError("checkpoint has no 'stem.weight' entry")
    return AquaNetConfig(base_channels=int(arrays["stem.weight"].shape[0]),
                         enable_frequency="freq.alpha" in arrays,
                         enable_illumination="illum.conv1.weight" in arrays)
