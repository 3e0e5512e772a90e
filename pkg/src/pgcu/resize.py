"""Separable resampling kernels with half-pixel alignment and edge replication.

Resizing is a linear map applied along each spatial axis: ``A_h @ x @ A_w.T``.
The matrices are built once per (size, scale, kernel) and work for numpy
arrays and torch tensors alike.
"""

from functools import lru_cache

import numpy as np
import torch

CUBIC_A = -0.5


def cubic_kernel(t, a=CUBIC_A):
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def tent_kernel(t):
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=np.float64)))


_KERNELS = {"cubic": (cubic_kernel, 2.0), "linear": (tent_kernel, 1.0)}


@lru_cache(maxsize=256)
def resize_matrix(n_in, n_out, kernel="cubic"):
    """(n_out, n_in) resampling matrix.

    Output sample ``i`` sits at source coordinate ``(i + 0.5) * n_in / n_out - 0.5``.
    When shrinking, the kernel is stretched by ``n_in / n_out`` (anti-aliasing)
    and its weights are renormalised to sum to one.  Out-of-range taps are
    clamped to the border pixel.
    """
    fn, support = _KERNELS[kernel]
    ratio = n_in / n_out
    stretch = max(ratio, 1.0)
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        x = (i + 0.5) * ratio - 0.5
        lo = int(np.floor(x - support * stretch))
        hi = int(np.ceil(x + support * stretch))
        taps = np.arange(lo, hi + 1)
        w = fn((x - taps) / stretch)
        w = w / w.sum()
        np.add.at(mat[i], np.clip(taps, 0, n_in - 1), w)
    mat.setflags(write=False)
    return mat


def _apply(x, a_h, a_w):
    if isinstance(x, torch.Tensor):
        a_h = torch.tensor(a_h, dtype=x.dtype, device=x.device)
        a_w = torch.tensor(a_w, dtype=x.dtype, device=x.device)
    return a_h @ x @ a_w.T


def resize(x, out_hw, kernel):
    h, w = x.shape[-2:]
    return _apply(x, resize_matrix(h, out_hw[0], kernel), resize_matrix(w, out_hw[1], kernel))


def bicubic_upsample(x, r):
    if r < 1:
        raise ValueError("scale must be >= 1")
    h, w = x.shape[-2:]
    return resize(x, (h * r, w * r), "cubic")


def bilinear_upsample(x, r):
    if r < 1:
        raise ValueError("scale must be >= 1")
    h, w = x.shape[-2:]
    return resize(x, (h * r, w * r), "linear")


def bicubic_downsample(x, r):
    """Anti-aliased bicubic shrink by integer factor ``r`` (linear, constant-preserving)."""
    h, w = x.shape[-2:]
    if r < 1 or h % r or w % r:
        raise ValueError(f"size {(h, w)} not divisible by {r}")
    return resize(x, (h // r, w // r), "cubic")
