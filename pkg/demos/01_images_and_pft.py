"""Images, the PFT1 tensor format, and PNG export.

Writes into ./demo_out/images.
"""

from pathlib import Path

import numpy as np

from pgcu import MSImage, PanImage, export_png, load_tensor, save_tensor
from pgcu.core import BadMagic, RangeError

out = Path("demo_out/images")
out.mkdir(parents=True, exist_ok=True)

# --- Image types ---
rng = np.random.default_rng(0)
ms = MSImage(rng.random((4, 32, 32)))
pan = PanImage(ms.data.mean(axis=0))
print("MS", ms.shape, "PAN", pan.shape)

try:
    MSImage(np.full((4, 8, 8), 1.5))
except RangeError as e:
    print("rejected:", e)
print("clamped max:", MSImage(np.full((4, 8, 8), 1.5), clamp=True).data.max())

# --- PFT1 round trip ---
save_tensor(ms.data.astype(np.float32), out / "ms.pft")
raw = (out / "ms.pft").read_bytes()
print("header:", raw[:4], "rank", raw[4], "bytes", len(raw))
back = load_tensor(out / "ms.pft")
print("bit exact:", back.tobytes() == ms.data.astype(np.float32).tobytes())

(out / "bad.pft").write_bytes(b"NOPE" + raw[4:])
try:
    load_tensor(out / "bad.pft")
except BadMagic as e:
    print("bad magic:", e)

# --- PNG export (channels 2,1,0 as RGB) ---
export_png(ms, out / "ms_rgb.png", channel_order=(2, 1, 0))
export_png(pan, out / "pan.png")
print("wrote", sorted(p.name for p in out.iterdir()))
