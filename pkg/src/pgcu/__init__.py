"""Probability-based global cross-modal upsampling (PGCU) for pansharpening."""

from .backbone import Backbone, BackboneConfig, backbone_backward
from .baselines import make_upsampler
from .core import MSImage, PanImage, export_png, load_tensor, save_tensor
from .data import SynthConfig, build_corpus, load_corpus, simulate_pan, synth_hrms, wald_degrade
from .metrics import MetricsReport, evaluate_all
from .module import PGCU, PGCUConfig, init_params, pgcu_backward, upsample
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "BackboneConfig",
    "MSImage",
    "MetricsReport",
    "PGCU",
    "PGCUConfig",
    "PanImage",
    "SynthConfig",
    "TrainConfig",
    "backbone_backward",
    "build_corpus",
    "evaluate_all",
    "export_png",
    "init_params",
    "load_corpus",
    "load_tensor",
    "make_upsampler",
    "pgcu_backward",
    "save_tensor",
    "simulate_pan",
    "synth_hrms",
    "train",
    "upsample",
    "wald_degrade",
]
