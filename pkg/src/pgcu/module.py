"""Probability-based global cross-modal upsampling.

Every output pixel ``h[c, i, j]`` is the expectation of a discrete
distribution over ``n`` candidate values shared by all pixels of channel
``c``.  The candidate values come from a downsampled fusion of PAN and LRMS
(``extract_v``); the probabilities come from the cosine similarity between a
per-pixel feature (``extract_f``) and a per-candidate feature
(``extract_g``), each passed through its channel's own linear + layer-norm
projection, followed by a softmax over candidates.  A 3x3 convolution then
mixes neighbouring pixels and channels.

All tensors carry a leading batch axis: LRMS ``(B, C, h, w)``, PAN
``(B, 1, H, W)`` with ``H = r*h``.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .core import MSImage, load_tensor, save_tensor

COSINE_EPS = 1e-8
LAYERNORM_EPS = 1e-5


class ShapeError(ValueError):
    pass


@dataclass
class PGCUConfig:
    channels: int
    scale: int = 4
    stride: int = 2
    pan_ds_blocks: int = 3
    ms_ds_blocks: int = 2
    feat_dim: int = 128
    hidden_channels: int = 32
    use_pan: bool = True
    use_channel_projection: bool = True

    def __post_init__(self):
        for name in ("channels", "scale", "stride", "feat_dim", "hidden_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.pan_ds_blocks < 0 or self.ms_ds_blocks < 0:
            raise ValueError("block counts must be >= 0")

    @property
    def shrink(self):
        return 2 * self.stride

    def num_values(self, lrms_hw, pan_hw=None):
        """Number of candidate values ``n`` for the given input sizes.

        Raises ShapeError when the PAN and LRMS branches would not land on
        the same grid after downsampling.
        """
        h, w = lrms_hw
        if pan_hw is None:
            pan_hw = (h * self.scale, w * self.scale)
        ph, pw = pan_hw
        if (ph, pw) != (self.scale * h, self.scale * w):
            raise ShapeError(f"PAN {pan_hw} must be scale={self.scale} times LRMS {lrms_hw}")
        fm = self.shrink ** self.ms_ds_blocks
        fp = self.shrink ** self.pan_ds_blocks
        if h % fm or w % fm:
            raise ShapeError(f"LRMS {lrms_hw} not divisible by (2s)^M = {fm}")
        if ph % fp or pw % fp:
            raise ShapeError(f"PAN {pan_hw} not divisible by (2s)^N = {fp}")
        grid_ms = (h // fm, w // fm)
        grid_pan = (ph // fp, pw // fp)
        if grid_ms != grid_pan:
            raise ShapeError(f"downsampled grids differ: PAN branch {grid_pan} vs LRMS branch {grid_ms}")
        return grid_ms[0] * grid_ms[1]


def ds_block(x, weight, bias, stride):
    """3x3 conv (stride ``stride``, zero pad 1) -> ReLU -> 2x2 max pool."""
    a, b = x.shape[-2:]
    if a % (2 * stride) or b % (2 * stride):
        raise ShapeError(f"spatial size {(a, b)} not divisible by {2 * stride}")
    y = F.relu(F.conv2d(x, weight, bias, stride=stride, padding=1))
    return F.max_pool2d(y, 2)


def similarity_probabilities(pfv, vfv):
    """Softmax over candidates of the cosine similarity between pixel and value features.

    pfv: (B, C, H, W, D); vfv: (B, C, n, D) -> (B, C, H, W, n)
    """
    dots = torch.einsum("bchwd,bckd->bchwk", pfv, vfv)
    nf = torch.linalg.vector_norm(pfv, dim=-1)
    ng = torch.linalg.vector_norm(vfv, dim=-1)
    sim = dots / (nf[..., None] * ng[:, :, None, None, :] + COSINE_EPS)
    return torch.softmax(sim, dim=-1)


def expectation(prob, values):
    """prob: (B, C, H, W, n), values: (B, C, n) -> (B, C, H, W)."""
    return torch.einsum("bchwk,bck->bchw", prob, values)


def layer_norm(x, gain, offset):
    mu = x.mean(dim=-1, keepdim=True)
    var = ((x - mu) ** 2).mean(dim=-1, keepdim=True)
    return (x - mu) / torch.sqrt(var + LAYERNORM_EPS) * gain + offset


class ChannelProjection(nn.Module):
    """Per-channel ``Linear(D, D)`` followed by layer norm; one shared map when ``groups == 1``."""

    def __init__(self, groups, dim):
        super().__init__()
        self.groups = groups
        self.dim = dim
        self.weight = nn.Parameter(torch.empty(groups, dim, dim))
        self.bias = nn.Parameter(torch.empty(groups, dim))
        self.ln_gain = nn.Parameter(torch.empty(groups, dim))
        self.ln_offset = nn.Parameter(torch.empty(groups, dim))

    def forward(self, x):
        # x: (B, C, ..., D)
        b, c = x.shape[:2]
        flat = x.reshape(b, c, -1, self.dim)
        if self.groups == 1:
            y = flat @ self.weight[0].T + self.bias[0]
            y = layer_norm(y, self.ln_gain[0], self.ln_offset[0])
        else:
            if self.groups != c:
                raise ShapeError(f"projection built for {self.groups} channels, got {c}")
            y = torch.einsum("bcpd,ced->bcpe", flat, self.weight) + self.bias[None, :, None, :]
            y = layer_norm(y, self.ln_gain[None, :, None, :], self.ln_offset[None, :, None, :])
        return y.reshape(x.shape)


def _conv(cin, cout):
    return nn.Conv2d(cin, cout, 3, 1, 1)


class DownsamplingPath(nn.Module):
    """DS_N(PAN) and DS_M(LRMS) branches fused by one head convolution."""

    def __init__(self, cfg, out_channels):
        super().__init__()
        hid = cfg.hidden_channels
        self.pan = nn.ModuleList()
        if cfg.use_pan:
            self.pan.extend(_conv(1 if i == 0 else hid, hid) for i in range(cfg.pan_ds_blocks))
        self.ms = nn.ModuleList(_conv(cfg.channels if i == 0 else hid, hid) for i in range(cfg.ms_ds_blocks))
        ms_out = hid if cfg.ms_ds_blocks else cfg.channels
        pan_out = (hid if cfg.pan_ds_blocks else 1) if cfg.use_pan else 0
        self.head = _conv(ms_out + pan_out, out_channels)
        self.stride = cfg.stride
        self.use_pan = cfg.use_pan

    def forward(self, lrms, pan):
        x = lrms
        for conv in self.ms:
            x = ds_block(x, conv.weight, conv.bias, self.stride)
        parts = [x]
        if self.use_pan:
            p = pan
            for conv in self.pan:
                p = ds_block(p, conv.weight, conv.bias, self.stride)
            if p.shape[-2:] != x.shape[-2:]:
                raise ShapeError(f"branch grids differ: PAN {tuple(p.shape[-2:])} vs LRMS {tuple(x.shape[-2:])}")
            parts = [p, x]
        return self.head(torch.cat(parts, dim=1))


class PGCU(nn.Module):
    kind = "pgcu"
    uses_pan = True

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        C, D, hid = cfg.channels, cfg.feat_dim, cfg.hidden_channels
        self.scale = cfg.scale
        self.v_path = DownsamplingPath(cfg, C)
        self.g_path = DownsamplingPath(cfg, C * D)
        self.f_pan = _conv(1, hid) if cfg.use_pan else None
        self.f_ms = _conv(C, hid)
        self.f_head = _conv(hid * (2 if cfg.use_pan else 1), C * D)
        groups = C if cfg.use_channel_projection else 1
        self.proj_f = ChannelProjection(groups, D)
        self.proj_g = ChannelProjection(groups, D)
        self.fa = _conv(C, C)

    def _check(self, lrms, pan):
        if lrms.ndim != 4 or lrms.shape[1] != self.cfg.channels:
            raise ShapeError(f"LRMS must be (B, {self.cfg.channels}, h, w), got {tuple(lrms.shape)}")
        if pan.ndim == 3:
            pan = pan[:, None]
        if pan.ndim != 4 or pan.shape[1] != 1 or pan.shape[0] != lrms.shape[0]:
            raise ShapeError(f"PAN must be (B, 1, H, W), got {tuple(pan.shape)}")
        self.cfg.num_values(tuple(lrms.shape[-2:]), tuple(pan.shape[-2:]))
        return pan

    def extract_v(self, lrms, pan):
        """Candidate values in (0, 1), shape (B, C, n); n flattened row-major."""
        v = torch.sigmoid(self.v_path(lrms, pan))
        return v.flatten(2)

    def extract_g(self, lrms, pan):
        """Per-candidate features, shape (B, C, n, D)."""
        g = self.g_path(lrms, pan)
        b, _, a, w = g.shape
        C, D = self.cfg.channels, self.cfg.feat_dim
        return g.reshape(b, C, D, a * w).transpose(2, 3)

    def extract_f(self, lrms, pan):
        """Per-pixel cross-modal features, shape (B, C, H, W, D)."""
        up = nearest_upsample(lrms, self.scale)
        if pan.shape[-2:] != up.shape[-2:]:
            raise ShapeError(f"PAN {tuple(pan.shape[-2:])} vs upsampled LRMS {tuple(up.shape[-2:])}")
        parts = [F.relu(self.f_ms(up))]
        if self.cfg.use_pan:
            parts.insert(0, F.relu(self.f_pan(pan)))
        f = self.f_head(torch.cat(parts, dim=1))
        b, _, H, W = f.shape
        C, D = self.cfg.channels, self.cfg.feat_dim
        return f.reshape(b, C, D, H, W).permute(0, 1, 3, 4, 2)

    def channel_project(self, x, side):
        return {"F": self.proj_f, "G": self.proj_g}[side](x)

    def fine_adjust(self, x):
        return self.fa(x)

    def forward(self, lrms, pan, return_details=False):
        pan = self._check(lrms, pan)
        values = self.extract_v(lrms, pan)
        pfv = self.channel_project(self.extract_f(lrms, pan), "F")
        vfv = self.channel_project(self.extract_g(lrms, pan), "G")
        prob = similarity_probabilities(pfv, vfv)
        coarse = expectation(prob, values)
        out = self.fine_adjust(coarse)
        if return_details:
            return out, {"values": values, "prob": prob, "coarse": coarse, "pfv": pfv, "vfv": vfv}
        return out

    def param_count(self):
        return sum(p.numel() for p in self.parameters())


def nearest_upsample(x, r):
    """Replicate each pixel into an r x r block (last two axes)."""
    if r < 1:
        raise ValueError("scale must be >= 1")
    if isinstance(x, np.ndarray):
        return x.repeat(r, axis=-2).repeat(r, axis=-1)
    return x.repeat_interleave(r, dim=-2).repeat_interleave(r, dim=-1)


def init_module(module, seed):
    """Fan-in uniform weights in [-sqrt(1/fan_in), sqrt(1/fan_in)], zero biases, unit layer-norm gains.

    Draws happen in float64 from one seeded generator in module order, so a
    float32 and a float64 copy initialised with the same seed agree up to
    rounding.
    """
    gen = torch.Generator().manual_seed(int(seed))

    def uniform_(p, fan_in):
        bound = (1.0 / fan_in) ** 0.5
        draw = torch.rand(p.shape, generator=gen, dtype=torch.float64) * (2 * bound) - bound
        p.data.copy_(draw)

    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                k = m.kernel_size[0] * m.kernel_size[1]
                uniform_(m.weight, m.in_channels * k)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, ChannelProjection):
                uniform_(m.weight, m.dim)
                m.bias.zero_()
                m.ln_gain.fill_(1.0)
                m.ln_offset.zero_()
    return module


def init_params(cfg, seed, dtype=torch.float64):
    """Build a PGCU with deterministic parameters for ``(cfg, seed)``."""
    model = PGCU(cfg).to(dtype)
    init_module(model, seed)
    return model


def pgcu_backward(model, lrms, pan, upstream):
    """Gradients of ``<forward(lrms, pan), upstream>`` w.r.t. every parameter and both inputs.

    Returns a dict keyed by parameter name plus ``"lrms"`` and ``"pan"``.
    Unused inputs (PAN with ``use_pan=False``) get exact zeros.
    """
    lrms = lrms.detach().clone().requires_grad_(True)
    pan = pan.detach().clone().requires_grad_(True)
    names, params = zip(*model.named_parameters())
    out = model(lrms, pan)
    grads = torch.autograd.grad(out, (*params, lrms, pan), upstream, allow_unused=True)
    keys = (*names, "lrms", "pan")
    targets = (*params, lrms, pan)
    return {k: torch.zeros_like(t) if g is None else g for k, g, t in zip(keys, grads, targets)}


def materialize(out):
    """Clamp a single unclamped (C, H, W) output into an MSImage."""
    arr = out.detach().cpu().double().numpy()
    return MSImage(np.clip(arr, 0.0, 1.0))


def upsample(model, lrms, pan):
    """Run ``model`` on an MSImage/PanImage pair and return the clamped MSImage."""
    dtype = next(model.parameters()).dtype
    x = torch.tensor(lrms.data, dtype=dtype)[None]
    p = torch.tensor(pan.data, dtype=dtype)[None, None]
    with torch.no_grad():
        return materialize(model(x, p)[0])


def save_params(model, directory, seed=None):
    """Write every parameter as ``<name>.pft`` plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name, p in model.named_parameters():
        fname = f"{name}.pft"
        save_tensor(p.detach().cpu().numpy(), directory / fname)
        tensors[name] = {"file": fname, "shape": list(p.shape)}
    manifest = {"kind": "pgcu", "config": asdict(model.cfg), "seed": seed, "tensors": tensors}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_params(directory, dtype=torch.float32):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    model = PGCU(PGCUConfig(**manifest["config"])).to(dtype)
    load_state_into(model, directory, manifest["tensors"])
    return model, manifest


def load_state_into(model, directory, tensors):
    """Copy PFT1 tensors listed in ``tensors`` into the model's parameters by name."""
    own = dict(model.named_parameters())
    missing = set(own) - set(tensors)
    extra = set(tensors) - set(own)
    if missing or extra:
        raise KeyError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
    with torch.no_grad():
        for name, p in own.items():
            arr = load_tensor(Path(directory) / tensors[name]["file"])
            if tuple(arr.shape) != tuple(p.shape):
                raise ShapeError(f"{name}: stored shape {arr.shape} != model shape {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))
