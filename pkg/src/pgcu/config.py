"""Strict JSON run configuration: unknown keys and wrong types are rejected before any work."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import UPSAMPLERS
from .data import ConfigError, SynthConfig
from .metrics import KEYS
from .module import PGCUConfig, ShapeError
from .training import TrainConfig

PGCU_KEYS = tuple(f.name for f in dataclasses.fields(PGCUConfig) if f.name not in ("channels", "scale"))


@dataclass
class ModelSection:
    upsampler: str = "pgcu"
    num_res_blocks: int = 4
    width: int = 32
    freeze_upsampler: bool = False
    init_seed: int = 0
    pgcu: dict = field(default_factory=dict)


@dataclass
class EvalSection:
    metrics: list = field(default_factory=lambda: list(KEYS))


@dataclass
class AnalysisSection:
    k: int = 6
    seed: int = 0


@dataclass
class RunConfig:
    data: SynthConfig
    model: ModelSection
    train: TrainConfig
    eval: EvalSection
    analysis: AnalysisSection

    def to_dict(self):
        return dataclasses.asdict(self)

    def backbone_config(self, channels=None, scale=None, **overrides):
        from .backbone import BackboneConfig

        m = self.model
        return BackboneConfig(
            channels=channels or self.data.channels,
            scale=scale or self.data.scale,
            upsampler=overrides.get("upsampler", m.upsampler),
            num_res_blocks=m.num_res_blocks,
            width=m.width,
            freeze_upsampler=m.freeze_upsampler,
            pgcu={**m.pgcu, **overrides.get("pgcu", {})},
        )


def _typecheck(value, typ, where):
    if value is None:
        return
    ok = {
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        bool: isinstance(value, bool),
        str: isinstance(value, str),
        list: isinstance(value, list),
        dict: isinstance(value, dict),
    }.get(typ, True)
    if not ok:
        raise ConfigError(where, f"expected {typ.__name__}, got {type(value).__name__}")


def _section(cls, raw, prefix, skip=()):
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "must be an object")
    names = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    for key in raw:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    for key, value in raw.items():
        _typecheck(value, names[key].type, f"{prefix}.{key}")
    try:
        return cls(**raw)
    except ConfigError as e:
        raise ConfigError(f"{prefix}.{e.field}", str(e).split(": ", 1)[-1]) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(prefix, str(e)) from None


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be a JSON object")
    allowed = {"data", "model", "train", "eval", "analysis"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown section")
    data = _section(SynthConfig, raw.get("data", {}), "data")
    model = _section(ModelSection, raw.get("model", {}), "model")
    train = _section(TrainConfig, raw.get("train", {}), "train", skip=("checkpoint_dir",))
    ev = _section(EvalSection, raw.get("eval", {}), "eval")
    an = _section(AnalysisSection, raw.get("analysis", {}), "analysis")

    if model.upsampler not in UPSAMPLERS:
        raise ConfigError("model.upsampler", f"unknown upsampler {model.upsampler!r}")
    for key, value in model.pgcu.items():
        if key not in PGCU_KEYS:
            raise ConfigError(f"model.pgcu.{key}", "unknown key")
        typ = {f.name: f.type for f in dataclasses.fields(PGCUConfig)}[key]
        _typecheck(value, typ, f"model.pgcu.{key}")
    try:
        pc = PGCUConfig(channels=data.channels, scale=data.scale, **model.pgcu)
    except ValueError as e:
        raise ConfigError("model.pgcu", str(e)) from None
    if model.upsampler == "pgcu" or model.pgcu:
        check_pgcu_shapes(pc, data.height, data.width)
    if model.width < 1 or model.num_res_blocks < 0:
        raise ConfigError("model.width", "backbone sizes must be positive")
    for name in ev.metrics:
        if name not in KEYS:
            raise ConfigError("eval.metrics", f"unknown metric {name!r}")
    if an.k < 1:
        raise ConfigError("analysis.k", "must be >= 1")
    return RunConfig(data=data, model=model, train=train, eval=ev, analysis=an)


def check_pgcu_shapes(pc, height, width):
    try:
        pc.num_values((height // pc.scale, width // pc.scale), (height, width))
    except ShapeError as e:
        raise ConfigError("model.pgcu", f"incompatible with data {height}x{width}: {e}") from None


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON: {e}") from None
    return parse_config(raw)
