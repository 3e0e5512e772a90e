"""Train the residual backbone twice, once with bicubic and once with PGCU, on a tiny corpus.

Runs in seconds on one CPU core.  The numbers are a smoke test, not a benchmark.
"""

from pathlib import Path

import torch

from pgcu import Backbone, BackboneConfig, SynthConfig, TrainConfig, build_corpus, load_corpus, train
from pgcu.metrics import render_table
from pgcu.training import evaluate, load_checkpoint

torch.set_num_threads(1)
out = Path("demo_out/train")
build_corpus(SynthConfig(channels=4, height=32, width=32, num_samples=20, motif_size=4), out / "corpus")
corpus = load_corpus(out / "corpus")

pgcu_cfg = {"pan_ds_blocks": 1, "ms_ds_blocks": 0, "feat_dim": 16, "hidden_channels": 16}
rows = []
for kind in ("bicubic", "pgcu"):
    model = Backbone(BackboneConfig(channels=4, upsampler=kind, num_res_blocks=2, width=16, pgcu=pgcu_cfg))
    print(kind, "trainable parameters:", model.param_count(trainable_only=True))
    cfg = TrainConfig(epochs=15, batch_size=4, lr=1e-3, eval_every=20, checkpoint_dir=str(out / kind))
    state, history = train(model, corpus, cfg, history_path=out / f"{kind}.jsonl")
    for rec in history:
        print(f"  step {rec['step']:4d}  loss {rec['loss']:.2e}  psnr {rec['metrics']['psnr']:.2f}")
    rows.append((kind, evaluate(model, corpus.test, 4)))

print(render_table(rows, "test split"))

# --- Checkpoints reload to the same predictions ---
model, state, manifest = load_checkpoint(out / "pgcu")
print("reloaded step", state.step, "psnr", round(evaluate(model, corpus.test, 4).psnr, 4))
