"""Information-theoretic diagnostics of per-pixel distributions."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import quantize

SIMPLEX_TOL = 1e-5
MAX_ITER = 100

# 12-colour qualitative palette for label maps
PALETTE = np.array(
    [
        [31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40],
        [148, 103, 189], [140, 86, 75], [227, 119, 194], [127, 127, 127],
        [188, 189, 34], [23, 190, 207], [255, 255, 255], [0, 0, 0],
    ],
    dtype=np.uint8,
)  # fmt: skip


class SimplexError(ValueError):
    pass


def _check_simplex(p, what="distribution"):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < -SIMPLEX_TOL) or np.any(np.abs(p.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise SimplexError(f"{what} is not on the probability simplex")
    return p


def _xlogy_ratio(p, m):
    # p * log(p / m) with 0 log 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = p * np.log(p / m)
    return np.where(p > 0, t, 0.0)


def js_divergence(p, q):
    """Jensen-Shannon divergence (natural log); broadcasts over leading axes."""
    p = _check_simplex(p)
    q = _check_simplex(q)
    m = 0.5 * (p + q)
    return 0.5 * _xlogy_ratio(p, m).sum(axis=-1) + 0.5 * _xlogy_ratio(q, m).sum(axis=-1)


def _js_unchecked(p, q):
    m = 0.5 * (p + q)
    return 0.5 * _xlogy_ratio(p, m).sum(axis=-1) + 0.5 * _xlogy_ratio(q, m).sum(axis=-1)


def entropy_map(field, channel):
    """Shannon entropy of each pixel's distribution divided by ln n; field is (C, H, W, n)."""
    p = _check_simplex(np.asarray(field)[channel], "field")
    n = p.shape[-1]
    if n == 1:
        return np.zeros(p.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=-1)
    return np.clip(h / np.log(n), 0.0, 1.0)


@dataclass
class Clustering:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    objective_history: list = field(default_factory=list)
    iterations: int = 0


def cluster_pixels(field, channel, k, seed=0):
    """K-means over pixel distributions with JS divergence as the distance.

    Centroids are arithmetic means of member distributions.  Seeded
    initialisation picks ``k`` distinct pixel distributions; an emptied
    cluster is reseeded with the pixel farthest from its centroid.
    """
    p = _check_simplex(np.asarray(field)[channel], "field")
    H, W, n = p.shape
    x = p.reshape(-1, n)
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct, first = np.unique(x, axis=0, return_index=True)
    if k > len(distinct):
        raise ValueError(f"k={k} exceeds the {len(distinct)} distinct distributions in the field")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(distinct), size=k, replace=False)
    centroids = x[np.sort(first[pick])].copy()
    labels = None
    history = []
    it = 0
    for it in range(1, MAX_ITER + 1):
        d = _js_unchecked(x[:, None, :], centroids[None, :, :])
        new = d.argmin(axis=1)
        obj = float(d[np.arange(len(x)), new].sum())
        history.append(obj)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                own = d[np.arange(len(x)), labels]
                far = int(own.argmax())
                centroids[j] = x[far]
                labels[far] = j
    d = _js_unchecked(x[:, None, :], centroids[None, :, :])
    objective = float(d[np.arange(len(x)), labels].sum())
    return Clustering(labels.reshape(H, W), centroids, objective, history, it)


def render_analysis(field, out_dir, k=6, seed=0, provenance=None):
    """Per channel: colour-indexed cluster PNG and grayscale entropy PNG, plus ``summary.json``."""
    field = np.asarray(field, dtype=np.float64)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    C, H, W, n = field.shape
    summary = {"k": k, "seed": seed, "shape": [C, H, W, n], "channels": []}
    if provenance:
        summary["provenance"] = provenance
    written = []
    for c in range(C):
        cl = cluster_pixels(field, c, k, seed)
        ent = entropy_map(field, c)
        lab_path = out / f"clusters_c{c}.png"
        ent_path = out / f"entropy_c{c}.png"
        Image.fromarray(PALETTE[cl.labels % len(PALETTE)]).save(lab_path, format="PNG")
        Image.fromarray(quantize(ent)).save(ent_path, format="PNG")
        written += [lab_path, ent_path]
        summary["channels"].append(
            {
                "channel": c,
                "mean_entropy": float(ent.mean()),
                "cluster_sizes": np.bincount(cl.labels.ravel(), minlength=k).tolist(),
                "objective": cl.objective,
                "iterations": cl.iterations,
            }
        )
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return written + [path]
