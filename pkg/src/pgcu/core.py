"""Image containers and the PFT1 tensor file format."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"PFT1"
MAX_RANK = 8


class PFTError(ValueError):
    """Malformed PFT1 file."""


class BadMagic(PFTError):
    pass


class Truncated(PFTError):
    pass


class RangeError(ValueError):
    """Image data outside [0, 1] or not finite."""


def _checked(data, ndim, clamp):
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"expected a rank-{ndim} array, got shape {arr.shape}")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"all dimensions must be >= 1, got {arr.shape}")
    bad = ~np.isfinite(arr) | (arr < 0.0) | (arr > 1.0)
    if bad.any():
        if not clamp:
            raise RangeError(f"{int(bad.sum())} values are NaN/inf or outside [0, 1]; pass clamp=True")
        arr = np.nan_to_num(arr, nan=0.0, posinf=1.0, neginf=0.0)
        arr = np.clip(arr, 0.0, 1.0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MSImage:
    """Multispectral image, shape (C, H, W), values in [0, 1]."""

    data: np.ndarray

    def __init__(self, data, clamp=False):
        object.__setattr__(self, "data", _checked(data, 3, clamp))

    @property
    def shape(self):
        return self.data.shape

    @property
    def channels(self):
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class PanImage:
    """Panchromatic image, shape (H, W), values in [0, 1]."""

    data: np.ndarray

    def __init__(self, data, clamp=False):
        object.__setattr__(self, "data", _checked(data, 2, clamp))

    @property
    def shape(self):
        return self.data.shape


def save_tensor(t, path):
    """Write ``t`` as PFT1: magic, rank byte, little-endian u32 dims, little-endian f32 payload."""
    arr = np.asarray(t)
    if arr.ndim > MAX_RANK:
        raise ValueError(f"rank {arr.ndim} exceeds {MAX_RANK}")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"all dims must be >= 1, got {arr.shape}")
    if any(d > 0xFFFFFFFF for d in arr.shape):
        raise OverflowError(f"dimension does not fit in u32: {arr.shape}")
    header = MAGIC + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_tensor(path):
    """Read a PFT1 file written by :func:`save_tensor`; returns a float32 array."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise BadMagic(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 5:
        raise Truncated(f"{path}: missing rank byte")
    rank = raw[4]
    if rank > MAX_RANK:
        raise PFTError(f"{path}: rank {rank} exceeds {MAX_RANK}")
    off = 5 + 4 * rank
    if len(raw) < off:
        raise Truncated(f"{path}: header declares {rank} dims but file ends early")
    dims = struct.unpack(f"<{rank}I", raw[5:off])
    if any(d < 1 for d in dims):
        raise PFTError(f"{path}: zero dimension in {dims}")
    need = 4 * int(np.prod(dims, dtype=np.int64))
    have = len(raw) - off
    if have < need:
        raise Truncated(f"{path}: payload has {have} bytes, dims {dims} need {need}")
    if have > need:
        raise PFTError(f"{path}: {have - need} trailing bytes after payload for dims {dims}")
    return np.frombuffer(raw, dtype="<f4", offset=off).reshape(dims).astype(np.float32)


def quantize(values):
    """Map [0, 1] floats to bytes with round-half-up."""
    return np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def export_png(img, path, channel_order=(0, 1, 2)):
    """Write up to three channels of ``img`` as an 8-bit PNG."""
    if isinstance(img, PanImage):
        planes = img.data[None]
        channel_order = [0]
    else:
        planes = img.data if isinstance(img, MSImage) else np.asarray(img, dtype=np.float64)
        if planes.ndim == 2:
            planes = planes[None]
    channel_order = list(channel_order)
    if not 1 <= len(channel_order) <= 3:
        raise ValueError("select 1 to 3 channels")
    for c in channel_order:
        if not 0 <= c < planes.shape[0]:
            raise IndexError(f"channel {c} out of range for {planes.shape[0]} channels")
    if len(channel_order) == 2:
        raise ValueError("two-channel PNG export is not supported; select 1 or 3 channels")
    sel = quantize(planes[channel_order])
    if len(channel_order) == 1:
        Image.fromarray(sel[0]).save(path, format="PNG")
    else:
        Image.fromarray(np.ascontiguousarray(sel.transpose(1, 2, 0))).save(path, format="PNG")
