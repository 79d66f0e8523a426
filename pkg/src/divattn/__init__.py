"""Multi-head spatial attention with a Hellinger diversity penalty, temporal pooling and OIM training for video re-identification.

Feature grids go in, L2-normalized video embeddings come out. The package
holds the forward and hand-written backward pass, an OIM-trained SGD loop,
retrieval metrics and a small CLI (``divattn``).
"""

from .config import Hyperparams, RunSettings, load_config, loads_config
from .errors import DivattnError
from .kernels import BACKEND
from .model import ModelParams, backward, describe, forward, init_params
from .oim import OimState
from .synthetic import SyntheticSpec, make_synthetic
from .train import train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DivattnError", "Hyperparams", "ModelParams", "OimState", "RunSettings",
    "SyntheticSpec", "backward", "describe", "forward", "init_params", "load_config",
    "loads_config", "make_synthetic", "train",
]
