"""The PGCU upsampler on its own: value vector, per-pixel distributions, expectation, fine adjustment."""

import numpy as np
import torch

from pgcu import PGCU, PGCUConfig, init_params
from pgcu.analysis import entropy_map

torch.manual_seed(0)

# --- Shapes at the sizes of the WorldView/GaoFen patches ---
cfg = PGCUConfig(channels=4)  # s=2, N=3, M=2, D=128
print("candidates per channel:", cfg.num_values((32, 32), (128, 128)))
print("parameters:", PGCU(cfg).param_count())

# --- A small instance we can look inside ---
small = PGCUConfig(channels=4, pan_ds_blocks=2, ms_ds_blocks=1, feat_dim=16)
model = init_params(small, seed=0)
lrms = torch.rand(1, 4, 16, 16, dtype=torch.float64)
pan = torch.rand(1, 1, 64, 64, dtype=torch.float64)

with torch.no_grad():
    out, d = model(lrms, pan, return_details=True)

V, P = d["values"], d["prob"]
print("output", tuple(out.shape))
print("V (channel 0):", np.round(V[0, 0].numpy(), 3))
print("P slice sums:", float(P.sum(-1).min()), float(P.sum(-1).max()))

# the expectation stays inside the range of the candidate values
H = d["coarse"]
print("coarse range ch0:", float(H[0, 0].min()), float(H[0, 0].max()), "V range:", float(V[0, 0].min()), float(V[0, 0].max()))

# untrained distributions are close to uniform
ent = entropy_map(P[0].numpy(), 0)
print("normalized entropy at init: mean %.4f, min %.4f" % (ent.mean(), ent.min()))

# --- Global receptive field: nudge one LRMS pixel, watch the far corner move ---
nudged = lrms.clone()
nudged[0, :, 0, 0] += 0.1
with torch.no_grad():
    delta = (model(nudged, pan) - out).abs()
print("far-corner change:", float(delta[0, :, -1, -1].max()))
