"""Reference-based quality metrics for (C, H, W) images in [0, 1]."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage, signal

PSNR_CAP = 100.0
SAM_EPS = 1e-12
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
LAPLACIAN = np.array([[-1, -1, -1], [-1, 8, -1], [-1, -1, -1]], dtype=np.float64)

KEYS = ("sam", "ergas", "ssim", "scc", "psnr")
LOWER_IS_BETTER = {"sam": True, "ergas": True, "ssim": False, "scc": False, "psnr": False}


class DegenerateReference(ValueError):
    """Reference channel with zero mean (ERGAS undefined)."""


def _pair(x, y):
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    y = np.asarray(getattr(y, "data", y), dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[None], y[None]
    return x, y


def psnr(x, y):
    """Peak signal-to-noise ratio with peak 1, from one global MSE; capped at 100 dB."""
    x, y = _pair(x, y)
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(1.0 / mse)))


def sam(x, y):
    """Mean spectral angle in radians; zero-spectrum pixels count as 0."""
    x, y = _pair(x, y)
    dot = np.sum(x * y, axis=0)
    norms = np.linalg.norm(x, axis=0) * np.linalg.norm(y, axis=0)
    cos = np.clip(dot / (norms + SAM_EPS), -1.0, 1.0)
    ang = np.where(norms > 0, np.arccos(cos), 0.0)
    return float(np.mean(ang))


def ergas(x_ref, y, scale):
    x, y = _pair(x_ref, y)
    mu = x.reshape(x.shape[0], -1).mean(axis=1)
    if np.any(mu == 0):
        raise DegenerateReference(f"reference channel(s) {np.flatnonzero(mu == 0).tolist()} have zero mean")
    rmse = np.sqrt(((x - y) ** 2).reshape(x.shape[0], -1).mean(axis=1))
    return float(100.0 / scale * np.sqrt(np.mean((rmse / mu) ** 2)))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, y):
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), valid positions only, channel mean."""
    x, y = _pair(x, y)
    if min(x.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"image {x.shape[-2:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = gaussian_window()
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    scores = []
    for xc, yc in zip(x, y):
        filt = lambda a: signal.correlate2d(a, win, mode="valid")  # noqa: E731
        mx, my = filt(xc), filt(yc)
        sxx = filt(xc * xc) - mx * mx
        syy = filt(yc * yc) - my * my
        sxy = filt(xc * yc) - mx * my
        smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx**2 + my**2 + c1) * (sxx + syy + c2))
        scores.append(smap.mean())
    return float(np.mean(scores))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if den == 0:
        return 0.0
    return float(np.sum(a * b) / den)


def scc(x, y):
    """Mean per-channel correlation of Laplacian-filtered images (zero padding)."""
    x, y = _pair(x, y)
    vals = []
    for xc, yc in zip(x, y):
        hx = ndimage.correlate(xc, LAPLACIAN, mode="constant")
        hy = ndimage.correlate(yc, LAPLACIAN, mode="constant")
        vals.append(_pearson(hx, hy))
    return float(np.mean(vals))


@dataclass(frozen=True)
class MetricsReport:
    sam: float
    ergas: float
    ssim: float
    scc: float
    psnr: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def mean(cls, reports):
        reports = list(reports)
        if not reports:
            raise ValueError("no reports to average")
        return cls(**{k: float(np.mean([getattr(r, k) for r in reports])) for k in KEYS})


def evaluate_all(x_ref, y, scale):
    return MetricsReport(
        sam=sam(x_ref, y),
        ergas=ergas(x_ref, y, scale),
        ssim=ssim(x_ref, y),
        scc=scc(x_ref, y),
        psnr=psnr(x_ref, y),
    )


def render_table(rows, title=None):
    """Text grid: one row per (name, MetricsReport); best value per column marked with ``*``."""
    rows = list(rows)
    best = {}
    for k in KEYS:
        vals = [getattr(r, k) for _, r in rows]
        best[k] = min(vals) if LOWER_IS_BETTER[k] else max(vals)
    arrows = {k: ("↓" if LOWER_IS_BETTER[k] else "↑") for k in KEYS}
    name_w = max([len("method")] + [len(n) for n, _ in rows])
    head = f"{'method':<{name_w}} " + " ".join(f"{k.upper() + arrows[k]:>10}" for k in KEYS)
    lines = [title] if title else []
    lines += [head, "-" * len(head)]
    for name, r in rows:
        cells = []
        for k in KEYS:
            v = getattr(r, k)
            cells.append(f"{v:>9.4f}" + ("*" if v == best[k] else " "))
        lines.append(f"{name:<{name_w}} " + " ".join(cells))
    return "\n".join(lines)
