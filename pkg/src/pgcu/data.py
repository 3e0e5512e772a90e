"""Synthetic (HRMS, LRMS, PAN) triplets under the Wald protocol."""

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import MSImage, PanImage, load_tensor, save_tensor
from .resize import bicubic_downsample


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class SynthConfig:
    channels: int = 4
    height: int = 64
    width: int = 64
    scale: int = 4
    num_samples: int = 80
    seed: int = 0
    motif_count: int = 4
    motif_size: int = 0  # 0 -> height // 8
    spectral_weights: list = None  # None -> uniform
    blur_sigma: float = 0.5
    train_fraction: float = 0.8

    def __post_init__(self):
        self.validate()

    def weights(self):
        if self.spectral_weights is None:
            return np.full(self.channels, 1.0 / self.channels)
        return np.asarray(self.spectral_weights, dtype=np.float64)

    def patch(self):
        return self.motif_size or max(2, self.height // 8)

    def validate(self):
        for name in ("channels", "height", "width", "scale", "num_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.height % self.scale:
            raise ConfigError("height", f"{self.height} not divisible by scale {self.scale}")
        if self.width % self.scale:
            raise ConfigError("width", f"{self.width} not divisible by scale {self.scale}")
        if self.motif_count < 0:
            raise ConfigError("motif_count", "must be >= 0")
        if self.blur_sigma < 0:
            raise ConfigError("blur_sigma", "must be >= 0")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction", "must be in (0, 1]")
        if self.spectral_weights is not None:
            w = np.asarray(self.spectral_weights, dtype=np.float64)
            if w.shape != (self.channels,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError("spectral_weights", "need one nonnegative weight per channel summing to 1")
        if self.motif_count:
            m = self.patch()
            if self.height < 2 * m or self.width < 2 * m:
                raise ConfigError("motif_size", f"motif {m} too large for {self.height}x{self.width}")

    def to_dict(self):
        return asdict(self)


@dataclass
class DatasetTriplet:
    hrms: MSImage
    lrms: MSImage
    pan: PanImage
    id: str


def _smooth_field(rng, h, w, waves=4):
    yy, xx = np.mgrid[0:h, 0:w] / np.array([h, w])[:, None, None]
    f = np.zeros((h, w))
    for _ in range(waves):
        ky, kx = rng.uniform(-3, 3, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        f += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * (ky * yy + kx * xx) + phase)
    f -= f.min()
    return f / max(f.max(), 1e-12)


def _motif(rng, m):
    kind = rng.integers(3)
    yy, xx = np.mgrid[0:m, 0:m] / m
    if kind == 0:  # stripes
        p = 0.5 + 0.5 * np.sign(np.sin(2 * np.pi * rng.integers(2, 4) * (xx if rng.random() < 0.5 else yy)))
    elif kind == 1:  # ring
        r = np.hypot(yy - 0.5, xx - 0.5)
        p = ((r > 0.2) & (r < 0.4)).astype(float)
    else:  # checker
        k = rng.integers(2, 4)
        p = ((np.floor(yy * k) + np.floor(xx * k)) % 2).astype(float)
    return p


def synth_hrms(cfg, index, return_stamps=False):
    """Deterministic HRMS for ``(cfg.seed, index)``.

    Smooth low-frequency fields mixed per channel, plus ``motif_count``
    textured patches each stamped at two sites more than ``height / 2``
    apart.  With ``return_stamps`` also returns ``[(motif, (y1, x1), (y2, x2)), ...]``.
    """
    rng = np.random.default_rng([cfg.seed, index])
    C, H, W = cfg.channels, cfg.height, cfg.width
    fields = np.stack([_smooth_field(rng, H, W) for _ in range(3)])
    mix = rng.dirichlet(np.ones(3), size=C)
    level = rng.uniform(0.15, 0.45, size=C)
    img = level[:, None, None] + 0.4 * np.einsum("ck,khw->chw", mix, fields)
    stamps = []
    m = cfg.patch()
    for k in range(cfg.motif_count):
        pattern = _motif(rng, m)
        signature = rng.uniform(-0.35, 0.35, size=C)
        y1 = int(rng.integers(0, H // 2 - m + 1))
        x1 = int(rng.integers(0, W - W // 4 - m + 1))
        y2, x2 = y1 + H // 2, x1 + W // 4
        for y, x in ((y1, x1), (y2, x2)):
            img[:, y : y + m, x : x + m] += signature[:, None, None] * pattern
        stamps.append((k, (y1, x1), (y2, x2)))
    out = MSImage(np.clip(img, 0.0, 1.0))
    return (out, stamps) if return_stamps else out


def simulate_pan(hrms, spectral_weights=None, blur_sigma=0.5):
    """Spectral-weighted channel sum, optional Gaussian blur, clamped to [0, 1]."""
    x = hrms.data
    w = np.full(x.shape[0], 1.0 / x.shape[0]) if spectral_weights is None else np.asarray(spectral_weights, float)
    if w.shape != (x.shape[0],) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("spectral weights must be one nonnegative weight per channel summing to 1")
    pan = np.tensordot(w, x, axes=1)
    if blur_sigma > 0:
        pan = ndimage.gaussian_filter(pan, blur_sigma, mode="reflect")
    return PanImage(np.clip(pan, 0.0, 1.0))


def wald_degrade(hrms, r):
    """Anti-aliased bicubic downsampling by ``r``, clamped to [0, 1]."""
    x = hrms.data if isinstance(hrms, MSImage) else np.asarray(hrms, dtype=np.float64)
    return MSImage(np.clip(bicubic_downsample(x, r), 0.0, 1.0))


def make_triplet(cfg, index):
    hrms = synth_hrms(cfg, index)
    # round through float32 so in-memory triplets match what the corpus files hold
    hrms = MSImage(hrms.data.astype(np.float32))
    lrms = MSImage(wald_degrade(hrms, cfg.scale).data.astype(np.float32))
    pan = PanImage(simulate_pan(hrms, cfg.weights(), cfg.blur_sigma).data.astype(np.float32))
    return DatasetTriplet(hrms=hrms, lrms=lrms, pan=pan, id=f"s{index:05d}")


def split_indices(n, seed, train_fraction):
    """Deterministic train/test split: rank indices by a hash of (seed, index)."""
    key = lambda i: hashlib.sha256(f"{seed}:{i}".encode()).hexdigest()  # noqa: E731
    order = sorted(range(n), key=key)
    n_train = int(round(train_fraction * n))
    return sorted(order[:n_train]), sorted(order[n_train:])


def build_corpus(cfg, out_dir):
    """Write every triplet as PFT1 files plus ``manifest.json``; returns the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = split_indices(cfg.num_samples, cfg.seed, cfg.train_fraction)
    entries = {}
    for i in range(cfg.num_samples):
        t = make_triplet(cfg, i)
        d = out / t.id
        d.mkdir(exist_ok=True)
        for name, img in (("hrms", t.hrms), ("lrms", t.lrms), ("pan", t.pan)):
            save_tensor(img.data, d / f"{name}.pft")
        entries[t.id] = {
            "hrms": [cfg.channels, cfg.height, cfg.width],
            "lrms": [cfg.channels, cfg.height // cfg.scale, cfg.width // cfg.scale],
            "pan": [cfg.height, cfg.width],
        }
    manifest = {
        "format": "pgcu-corpus/1",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "split": {"train": [f"s{i:05d}" for i in train], "test": [f"s{i:05d}" for i in test]},
        "samples": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_triplet(corpus_dir, sample_id):
    d = Path(corpus_dir) / sample_id
    return DatasetTriplet(
        hrms=MSImage(load_tensor(d / "hrms.pft")),
        lrms=MSImage(load_tensor(d / "lrms.pft")),
        pan=PanImage(load_tensor(d / "pan.pft")),
        id=sample_id,
    )


@dataclass
class Corpus:
    root: Path
    manifest: dict
    train: list
    test: list

    @property
    def config(self):
        return SynthConfig(**self.manifest["config"])


def load_corpus(corpus_dir):
    root = Path(corpus_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    split = manifest["split"]
    return Corpus(
        root=root,
        manifest=manifest,
        train=[load_triplet(root, i) for i in split["train"]],
        test=[load_triplet(root, i) for i in split["test"]],
    )
