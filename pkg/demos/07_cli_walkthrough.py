"""The `pgcu` command line, driven from Python.  Each call mirrors a shell invocation."""

import json
from pathlib import Path

from pgcu.cli import main

out = Path("demo_out/cli")
out.mkdir(parents=True, exist_ok=True)
config = {
    "data": {"channels": 4, "height": 32, "width": 32, "num_samples": 10, "motif_size": 4},
    "model": {"num_res_blocks": 1, "width": 8,
              "pgcu": {"pan_ds_blocks": 1, "ms_ds_blocks": 0, "feat_dim": 8, "hidden_channels": 8}},
    "train": {"epochs": 3, "batch_size": 4, "eval_every": 2},
}  # fmt: skip
(out / "run.json").write_text(json.dumps(config, indent=2))


def run(*argv):
    print("$ pgcu", " ".join(argv))
    code = main(list(argv))
    print("exit", code)


run("generate", "--config", str(out / "run.json"), "--out", str(out / "corpus"))
run("train", "--config", str(out / "run.json"), "--corpus", str(out / "corpus"), "--out", str(out / "run"))
run("compare", "--config", str(out / "run.json"), "--corpus", str(out / "corpus"),
    "--upsamplers", "nearest,bicubic,pgcu", "--bare", "--out", str(out / "compare"))  # fmt: skip
run("analyze", "--checkpoint", str(out / "run" / "checkpoint"), "--input", str(out / "corpus" / "s00000"),
    "--out", str(out / "analysis"), "--K", "4")  # fmt: skip

# a config error exits 2 and names the field
config["data"]["height"] = 30
(out / "bad.json").write_text(json.dumps(config))
run("generate", "--config", str(out / "bad.json"), "--out", str(out / "nope"))
