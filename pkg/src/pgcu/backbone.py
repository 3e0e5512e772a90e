"""Residual pansharpening network with a pluggable upsampler."""

from dataclasses import asdict, dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from .baselines import make_upsampler
from .module import PGCUConfig, init_module


@dataclass
class BackboneConfig:
    channels: int
    scale: int = 4
    upsampler: str = "pgcu"
    num_res_blocks: int = 4
    width: int = 32
    freeze_upsampler: bool = False
    pgcu: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.channels < 1 or self.scale < 1 or self.width < 1 or self.num_res_blocks < 0:
            raise ValueError("backbone sizes must be positive")

    def pgcu_config(self):
        return PGCUConfig(channels=self.channels, scale=self.scale, **self.pgcu)

    def to_dict(self):
        return asdict(self)


class ResBlock(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3, 1, 1)
        self.conv2 = nn.Conv2d(width, width, 3, 1, 1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class Body(nn.Module):
    def __init__(self, in_channels, out_channels, width, num_blocks):
        super().__init__()
        self.head = nn.Conv2d(in_channels, width, 3, 1, 1)
        self.blocks = nn.Sequential(*(ResBlock(width) for _ in range(num_blocks)))
        self.tail = nn.Conv2d(width, out_channels, 3, 1, 1)

    def forward(self, x):
        return self.tail(self.blocks(F.relu(self.head(x))))


class Backbone(nn.Module):
    """``out = U + body(cat(U, PAN))`` where ``U`` is the upsampled LRMS."""

    def __init__(self, cfg, seed=0, dtype=torch.float32):
        super().__init__()
        self.cfg = cfg
        pgcu = cfg.pgcu_config() if cfg.upsampler == "pgcu" else None
        self.upsampler = make_upsampler(cfg.upsampler, cfg.channels, cfg.scale, seed=seed + 1, pgcu=pgcu, dtype=dtype)
        self.body = init_module(Body(cfg.channels + 1, cfg.channels, cfg.width, cfg.num_res_blocks).to(dtype), seed)
        if cfg.freeze_upsampler:
            self.upsampler.requires_grad_(False)

    def forward(self, lrms, pan, return_details=False):
        if pan.ndim == 3:
            pan = pan[:, None]
        details = {}
        if return_details and self.cfg.upsampler == "pgcu":
            up, details = self.upsampler(lrms, pan, return_details=True)
        else:
            up = self.upsampler(lrms, pan)
        out = up + self.body(torch.cat([up, pan], dim=1))
        if return_details:
            details["upsampled"] = up
            return out, details
        return out

    def zero_body(self):
        with torch.no_grad():
            for p in self.body.parameters():
                p.zero_()
        return self

    def param_count(self, trainable_only=False):
        return sum(p.numel() for p in self.parameters() if p.requires_grad or not trainable_only)


def backbone_backward(model, lrms, pan, upstream):
    """Gradients of ``<model(lrms, pan), upstream>`` for trainable parameters and both inputs.

    Frozen upsampler parameters are absent from the result.
    """
    lrms = lrms.detach().clone().requires_grad_(True)
    pan = pan.detach().clone().requires_grad_(True)
    named = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    out = model(lrms, pan)
    targets = [p for _, p in named] + [lrms, pan]
    grads = torch.autograd.grad(out, targets, upstream, allow_unused=True)
    keys = [n for n, _ in named] + ["lrms", "pan"]
    return {k: torch.zeros_like(t) if g is None else g for k, g, t in zip(keys, grads, targets)}
