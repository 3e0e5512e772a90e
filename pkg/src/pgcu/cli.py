"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numerical abort.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import torch

from . import analysis, data, training
from .backbone import Backbone
from .baselines import UPSAMPLERS
from .config import ConfigError, check_pgcu_shapes, load_config
from .core import load_tensor
from .metrics import MetricsReport, render_table

log = logging.getLogger("pgcu")

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


class CLIError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _digest(root):
    root = Path(root)
    if not root.exists():
        return None
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _load_corpus(path):
    if not (Path(path) / "manifest.json").is_file():
        raise CLIError(EXIT_IO, f"no corpus manifest at {path}")
    return data.load_corpus(path)


def _build_model(cfg, corpus_cfg, seed_offset=0, **overrides):
    bcfg = cfg.backbone_config(channels=corpus_cfg.channels, scale=corpus_cfg.scale, **overrides)
    if bcfg.upsampler == "pgcu":
        check_pgcu_shapes(bcfg.pgcu_config(), corpus_cfg.height, corpus_cfg.width)
    return Backbone(bcfg, seed=cfg.model.init_seed + seed_offset)


def _run(cfg, corpus, out_dir, seed_offset=0, resume=False, **overrides):
    """Train one configuration into ``out_dir``; returns the final test MetricsReport."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = training.TrainConfig(**{**cfg.train.__dict__, "checkpoint_dir": str(out / "checkpoint")})
    tcfg.seed = cfg.train.seed + seed_offset
    history = out / "history.jsonl"
    if resume:
        if not (out / "checkpoint" / "manifest.json").is_file():
            raise CLIError(EXIT_IO, f"nothing to resume in {out}")
        model, state, _ = training.load_checkpoint(out / "checkpoint")
    else:
        model = _build_model(cfg, corpus.config, seed_offset, **overrides)
        state = None
        history.unlink(missing_ok=True)
    try:
        training.train(model, corpus, tcfg, state=state, history_path=history)
    except training.NumericalError as e:
        raise CLIError(EXIT_NUMERIC, str(e)) from None
    report = training.evaluate(model, corpus.test or corpus.train, corpus.config.scale)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def cmd_generate(args):
    cfg = load_config(args.config)
    before = _digest(args.out)
    data.build_corpus(cfg.data, args.out)
    after = _digest(args.out)
    manifest = Path(args.out) / "manifest.json"
    if before is not None:
        print(f"rerun: corpus {'identical' if before == after else 'changed'} (sha256 {after[:16]})")
    print(manifest)


def cmd_train(args):
    cfg = load_config(args.config)
    corpus = _load_corpus(args.corpus)
    report = _run(cfg, corpus, args.out, resume=args.resume)
    print(report.to_json())


def cmd_evaluate(args):
    corpus = _load_corpus(args.corpus)
    if not (Path(args.checkpoint) / "manifest.json").is_file():
        raise CLIError(EXIT_IO, f"no checkpoint at {args.checkpoint}")
    model, _, _ = training.load_checkpoint(args.checkpoint)
    report = training.evaluate(model, corpus.test or corpus.train, corpus.config.scale)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(report.to_json())


def _seeds(text):
    return [int(s) for s in text.split(",") if s.strip()]


def _emit_table(rows, out, title, stem, metrics):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    text = render_table(rows, title)
    (out / f"{stem}.txt").write_text(text + "\n")
    payload = {"title": title, "metrics": metrics, "rows": [{"name": n, **r.to_dict()} for n, r in rows]}
    (out / f"{stem}.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(text)


def cmd_compare(args):
    cfg = load_config(args.config)
    corpus = _load_corpus(args.corpus)
    names = [s.strip() for s in args.upsamplers.split(",") if s.strip()]
    for n in names:
        if n not in UPSAMPLERS:
            raise CLIError(EXIT_CONFIG, f"--upsamplers: unknown upsampler {n!r} (known: {', '.join(UPSAMPLERS)})")
    seeds = _seeds(args.seeds)
    rows, per_seed = [], {}
    for i, name in enumerate(names):
        reports = []
        for s in seeds:
            run_dir = Path(args.out) / "runs" / f"{i:02d}_{name}" / f"seed{s}"
            if args.bare:
                model = _build_model(cfg, corpus.config, s, upsampler=name).upsampler
                reports.append(training.evaluate(model, corpus.test or corpus.train, corpus.config.scale))
            else:
                reports.append(_run(cfg, corpus, run_dir, seed_offset=s, upsampler=name))
        per_seed[f"{i:02d}_{name}"] = [r.to_dict() for r in reports]
        rows.append((name, MetricsReport.mean(reports)))
    _emit_table(rows, args.out, "upsampler comparison (mean over seeds %s)" % seeds, "compare", cfg.eval.metrics)
    (Path(args.out) / "compare_per_seed.json").write_text(json.dumps(per_seed, indent=2) + "\n")


def cmd_ablate(args):
    cfg = load_config(args.config)
    corpus = _load_corpus(args.corpus)
    seeds = _seeds(args.seeds)
    out = Path(args.out)
    grid = []
    for use_pan in (False, True):
        for proj in (False, True):
            name = f"pan={'yes' if use_pan else 'no'} proj={'yes' if proj else 'no'}"
            over = {"use_pan": use_pan, "use_channel_projection": proj}
            reports = [
                _run(cfg, corpus, out / "grid" / f"pan{int(use_pan)}_proj{int(proj)}" / f"seed{s}", s,
                     upsampler="pgcu", pgcu=over)
                for s in seeds
            ]  # fmt: skip
            grid.append((name, MetricsReport.mean(reports)))
    _emit_table(grid, out, "ablation: PAN information x channel projection", "ablation", cfg.eval.metrics)
    dims = [int(d) for d in args.feat_dims.split(",") if d.strip()]
    sweep = []
    for d in dims:
        reports = [
            _run(cfg, corpus, out / "feat_dim" / f"D{d}" / f"seed{s}", s, upsampler="pgcu", pgcu={"feat_dim": d})
            for s in seeds
        ]
        sweep.append((f"D={d}", MetricsReport.mean(reports)))
    if sweep:
        _emit_table(sweep, out, "feature vector length sweep", "feat_dim", cfg.eval.metrics)


def cmd_analyze(args):
    ckpt = Path(args.checkpoint)
    if not (ckpt / "manifest.json").is_file():
        raise CLIError(EXIT_IO, f"no checkpoint at {ckpt}")
    model, _, manifest = training.load_checkpoint(ckpt)
    inp = Path(args.input)
    try:
        lrms = load_tensor(inp / "lrms.pft")
        pan = load_tensor(inp / "pan.pft")
    except FileNotFoundError as e:
        raise CLIError(EXIT_IO, str(e)) from None
    pgcu = model.upsampler if isinstance(model, Backbone) else model
    if getattr(pgcu, "kind", None) != "pgcu":
        raise CLIError(EXIT_CONFIG, "checkpoint does not contain a PGCU upsampler")
    if lrms.ndim != 3 or lrms.shape[0] != pgcu.cfg.channels or pan.shape != tuple(s * pgcu.scale for s in lrms.shape[1:]):
        raise CLIError(EXIT_CONFIG, f"input shapes {lrms.shape}/{pan.shape} do not match checkpoint config")
    with torch.no_grad():
        _, details = pgcu(torch.from_numpy(lrms)[None], torch.from_numpy(pan)[None, None], return_details=True)
    field = details["prob"][0].double().numpy()
    prov = {"checkpoint_step": manifest["step"], "input": inp.name}
    try:
        files = analysis.render_analysis(field, args.out, k=args.K, seed=args.seed, provenance=prov)
    except ValueError as e:
        raise CLIError(EXIT_CONFIG, str(e)) from None
    for f in files:
        print(f)


def build_parser():
    p = argparse.ArgumentParser(prog="pgcu", description="PGCU pansharpening toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesise a Wald-protocol corpus")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the configured backbone")
    t.add_argument("--config", required=True)
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on the corpus test split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="upsampler comparison table")
    c.add_argument("--corpus", required=True)
    c.add_argument("--upsamplers", required=True, help="comma list from: " + ",".join(UPSAMPLERS))
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seeds", default="0")
    c.add_argument("--bare", action="store_true", help="score upsamplers alone, without backbone or training")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("ablate", help="PAN/projection grid and feature-length sweep")
    a.add_argument("--corpus", required=True)
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--seeds", default="0")
    a.add_argument("--feat-dims", default="")
    a.set_defaults(func=cmd_ablate)

    z = sub.add_parser("analyze", help="JS clustering and entropy maps of a PGCU forward pass")
    z.add_argument("--checkpoint", required=True)
    z.add_argument("--input", required=True, help="corpus sample directory holding lrms.pft and pan.pft")
    z.add_argument("--out", required=True)
    z.add_argument("--K", type=int, default=6)
    z.add_argument("--seed", type=int, default=0)
    z.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except training.NumericalError as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
