"""Loss, Adam, the training loop and checkpoints."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .backbone import Backbone, BackboneConfig
from .core import load_tensor, save_tensor
from .metrics import MetricsReport, evaluate_all
from .module import PGCU, PGCUConfig, load_state_into

log = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """A gradient or parameter became NaN/inf."""


@dataclass
class TrainConfig:
    loss: str = "l2"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    eval_every: int = 0  # in steps; 0 evaluates only at the end
    max_steps: int = 0  # 0 means epochs * steps_per_epoch
    checkpoint_dir: str = None

    def __post_init__(self):
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"loss must be 'l1' or 'l2', got {self.loss!r}")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr, batch_size and epochs must be positive")
        if self.eval_every < 0 or self.max_steps < 0:
            raise ValueError("eval_every and max_steps must be >= 0")


def loss(pred, target, kind="l2"):
    """Mean loss and its exact gradient w.r.t. ``pred``."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    diff = pred - target
    n = diff.numel()
    if kind == "l2":
        return (diff * diff).sum() / n, 2.0 * diff / n
    if kind == "l1":
        return diff.abs().sum() / n, torch.sign(diff) / n
    raise ValueError(f"unknown loss {kind!r}")


@dataclass
class TrainState:
    params: dict
    m: dict
    v: dict
    step: int = 0
    seed: int = 0
    best: dict = None
    history: list = field(default_factory=list)


def new_state(model, seed=0):
    params = {n: p for n, p in model.named_parameters() if p.requires_grad}
    return TrainState(
        params=params,
        m={n: torch.zeros_like(p) for n, p in params.items()},
        v={n: torch.zeros_like(p) for n, p in params.items()},
        seed=seed,
    )


def optimizer_step(state, grads, cfg):
    """Bias-corrected Adam update applied in place; returns ``state``."""
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            bad = int((~torch.isfinite(g)).sum())
            raise NumericalError(f"non-finite gradient in {name} ({bad} entries) at step {state.step + 1}")
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    with torch.no_grad():
        for name, p in state.params.items():
            g = grads[name]
            m, v = state.m[name], state.v[name]
            m.mul_(cfg.beta1).add_(g, alpha=1.0 - cfg.beta1)
            v.mul_(cfg.beta2).addcmul_(g, g, value=1.0 - cfg.beta2)
            p.sub_(cfg.lr * (m / c1) / (torch.sqrt(v / c2) + cfg.eps))
    return state


def stack(triplets, dtype=torch.float32):
    lrms = torch.as_tensor(np.stack([t.lrms.data for t in triplets]), dtype=dtype)
    pan = torch.as_tensor(np.stack([t.pan.data for t in triplets])[:, None], dtype=dtype)
    hrms = torch.as_tensor(np.stack([t.hrms.data for t in triplets]), dtype=dtype)
    return lrms, pan, hrms


def predict(model, triplets, batch_size=8):
    """Clamped predictions as float64 arrays, one per triplet."""
    out = []
    dtype = next(iter(model.parameters()), torch.zeros((), dtype=torch.float32)).dtype
    with torch.no_grad():
        for i in range(0, len(triplets), batch_size):
            lrms, pan, _ = stack(triplets[i : i + batch_size], dtype)
            pred = model(lrms, pan).clamp(0.0, 1.0).double().numpy()
            out.extend(pred)
    return out


def evaluate(model, triplets, scale, batch_size=8):
    preds = predict(model, triplets, batch_size)
    return MetricsReport.mean(evaluate_all(t.hrms.data, p, scale) for t, p in zip(triplets, preds))


def model_spec(model):
    if isinstance(model, Backbone):
        return {"kind": "backbone", "config": model.cfg.to_dict()}
    if isinstance(model, PGCU):
        return {"kind": "pgcu", "config": asdict(model.cfg)}
    raise TypeError(f"cannot describe {type(model).__name__}")


def build_from_spec(spec, dtype=torch.float32):
    if spec["kind"] == "backbone":
        return Backbone(BackboneConfig(**spec["config"]), dtype=dtype)
    if spec["kind"] == "pgcu":
        return PGCU(PGCUConfig(**spec["config"])).to(dtype)
    raise ValueError(f"unknown model kind {spec['kind']!r}")


def save_checkpoint(model, state, cfg, directory, extra=None):
    """Parameters, Adam moments and a JSON manifest; overwrites ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tensors, moments = {}, {}
    for name, p in model.named_parameters():
        save_tensor(p.detach().numpy(), d / f"{name}.pft")
        tensors[name] = {"file": f"{name}.pft", "shape": list(p.shape)}
    for name in state.params:
        for which, store in (("m", state.m), ("v", state.v)):
            fname = f"adam.{which}.{name}.pft"
            save_tensor(store[name].numpy(), d / fname)
            moments.setdefault(name, {})[which] = fname
    manifest = {
        "format": "pgcu-checkpoint/1",
        "model": model_spec(model),
        # where the checkpoint lives is not part of the run
        "train": {k: v for k, v in asdict(cfg).items() if k != "checkpoint_dir"},
        "step": state.step,
        "seed": state.seed,
        "best": state.best,
        "tensors": tensors,
        "moments": moments,
    }
    if extra:
        manifest.update(extra)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_checkpoint(directory, dtype=torch.float32):
    """Rebuild ``(model, state, manifest)`` from a checkpoint directory."""
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    model = build_from_spec(manifest["model"], dtype)
    load_state_into(model, d, manifest["tensors"])
    state = new_state(model, manifest.get("seed", 0))
    state.step = manifest["step"]
    state.best = manifest.get("best")
    for name, files in manifest.get("moments", {}).items():
        state.m[name].copy_(torch.from_numpy(load_tensor(d / files["m"])))
        state.v[name].copy_(torch.from_numpy(load_tensor(d / files["v"])))
    return model, state, manifest


def train(model, corpus, cfg, state=None, history_path=None, scale=None, guard=True):
    """Train ``model`` on ``corpus.train``; evaluate on ``corpus.test``.

    Batch order comes from ``default_rng([seed, epoch])``, so a run resumed
    from a checkpoint (pass its ``state``) follows the same trajectory as an
    uninterrupted one.  Returns ``(state, history)``; history records are
    ``{"step", "epoch", "loss", "metrics"}`` and are also appended to
    ``history_path`` as JSON lines.
    """
    scale = scale or corpus.config.scale
    dtype = next(model.parameters()).dtype
    if state is None:
        state = new_state(model, cfg.seed)
    lrms, pan, hrms = stack(corpus.train, dtype)
    n = lrms.shape[0]
    spe = -(-n // cfg.batch_size)
    total = cfg.epochs * spe
    if cfg.max_steps:
        total = min(total, cfg.max_steps)
    history = []
    running, count = 0.0, 0

    def checkpoint_and_log():
        nonlocal running, count
        metrics = evaluate(model, corpus.test, scale) if corpus.test else None
        rec = {
            "step": state.step,
            "epoch": state.step / spe,
            "loss": running / max(count, 1),
            "metrics": metrics.to_dict() if metrics else None,
        }
        running, count = 0.0, 0
        if metrics and (state.best is None or metrics.psnr > state.best["metrics"]["psnr"]):
            state.best = {"step": state.step, "metrics": metrics.to_dict()}
        history.append(rec)
        state.history.append(rec)
        if history_path:
            with open(history_path, "a") as fh:
                fh.write(json.dumps(rec) + "\n")
        if cfg.checkpoint_dir:
            save_checkpoint(model, state, cfg, cfg.checkpoint_dir)
        log.info("step %d loss %.6g %s", state.step, rec["loss"], rec["metrics"])

    model.train()
    while state.step < total:
        epoch, pos = divmod(state.step, spe)
        perm = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        idx = torch.as_tensor(perm[pos * cfg.batch_size : (pos + 1) * cfg.batch_size])
        for p in state.params.values():
            p.grad = None
        out = model(lrms[idx], pan[idx])
        value, g = loss(out, hrms[idx], cfg.loss)
        out.backward(g)
        grads = {name: (p.grad if p.grad is not None else torch.zeros_like(p)) for name, p in state.params.items()}
        optimizer_step(state, grads, cfg)
        if guard:
            for name, p in state.params.items():
                if not torch.isfinite(p).all():
                    raise NumericalError(f"parameter {name} became non-finite at step {state.step}")
        running += float(value.detach())
        count += 1
        if state.step == total or (cfg.eval_every and state.step % cfg.eval_every == 0):
            checkpoint_and_log()
    model.eval()
    return state, history
