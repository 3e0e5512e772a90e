"""Comparison upsamplers behind one interface: ``upsampler(lrms, pan) -> (B, C, r*h, r*w)``."""

import math

import torch
import torch.nn.functional as F
from torch import nn

from .module import PGCU, PGCUConfig, init_module, nearest_upsample
from .resize import bicubic_upsample, bilinear_upsample

__all__ = [
    "ESPCNN",
    "Interpolator",
    "TConv",
    "UPSAMPLERS",
    "bicubic_upsample",
    "bilinear_upsample",
    "espcnn_upsample",
    "make_upsampler",
    "nearest_upsample",
    "pixel_shuffle",
    "tconv_upsample",
]

_INTERP = {"nearest": nearest_upsample, "bilinear": bilinear_upsample, "bicubic": bicubic_upsample}


class Interpolator(nn.Module):
    """Parameter-free interpolation; ignores PAN."""

    uses_pan = False

    def __init__(self, kind, scale):
        super().__init__()
        if kind not in _INTERP:
            raise ValueError(f"unknown interpolator {kind!r}")
        self.kind = kind
        self.scale = scale

    def forward(self, lrms, pan=None):
        return _INTERP[self.kind](lrms, self.scale)


class TConv(nn.Module):
    """Stacked stride-2 transposed convolutions (kernel 4, pad 1), ReLU between."""

    kind = "tconv"
    uses_pan = False

    def __init__(self, channels, scale=4):
        super().__init__()
        depth = int(round(math.log2(scale)))
        if 2**depth != scale:
            raise ValueError("tconv needs a power-of-two scale")
        self.scale = scale
        self.layers = nn.ModuleList(nn.ConvTranspose2d(channels, channels, 4, 2, 1) for _ in range(depth))

    def forward(self, lrms, pan=None):
        return tconv_upsample(lrms, [(l.weight, l.bias) for l in self.layers])


def tconv_upsample(x, layers):
    for i, (w, b) in enumerate(layers):
        if i:
            x = F.relu(x)
        x = F.conv_transpose2d(x, w, b, stride=2, padding=1)
    return x


def pixel_shuffle(x, r):
    """(B, C*r*r, h, w) -> (B, C, r*h, r*w); channel ``c*r*r + k`` lands at offset ``(k // r, k % r)``."""
    return F.pixel_shuffle(x, r)


class ESPCNN(nn.Module):
    """Three 3x3 convolutions (C -> 32 -> 32 -> C*r^2) followed by pixel shuffle."""

    kind = "espcnn"
    uses_pan = False

    def __init__(self, channels, scale=4, width=32):
        super().__init__()
        self.scale = scale
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(channels, width, 3, 1, 1),
                nn.Conv2d(width, width, 3, 1, 1),
                nn.Conv2d(width, channels * scale * scale, 3, 1, 1),
            ]
        )

    def forward(self, lrms, pan=None):
        return espcnn_upsample(lrms, [(c.weight, c.bias) for c in self.convs], self.scale)


def espcnn_upsample(x, convs, r):
    for i, (w, b) in enumerate(convs):
        x = F.conv2d(x, w, b, padding=1)
        if i < len(convs) - 1:
            x = F.relu(x)
    return pixel_shuffle(x, r)


UPSAMPLERS = ("nearest", "bilinear", "bicubic", "tconv", "espcnn", "pgcu")


def make_upsampler(kind, channels, scale=4, seed=0, pgcu=None, dtype=torch.float32):
    """Build a registered upsampler with deterministic initial weights.

    ``pgcu`` is a PGCUConfig (or dict of its fields minus channels/scale)
    used only when ``kind == "pgcu"``.
    """
    if kind in _INTERP:
        return Interpolator(kind, scale)
    if kind == "tconv":
        m = TConv(channels, scale)
    elif kind == "espcnn":
        m = ESPCNN(channels, scale)
    elif kind == "pgcu":
        if pgcu is None:
            pgcu = PGCUConfig(channels=channels, scale=scale)
        elif isinstance(pgcu, dict):
            pgcu = PGCUConfig(channels=channels, scale=scale, **pgcu)
        if (pgcu.channels, pgcu.scale) != (channels, scale):
            raise ValueError("PGCU config channels/scale disagree with the data")
        m = PGCU(pgcu)
    else:
        raise ValueError(f"unknown upsampler {kind!r}; choose from {', '.join(UPSAMPLERS)}")
    return init_module(m.to(dtype), seed)
