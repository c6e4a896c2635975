"""Video INR GAN: generator sampling, metrics and the command line from Python."""

import torch as _torch  # loads libtorch before the extension module

from ._core import (
    Config,
    Generator,
    desk_config,
    frechet_distance,
    inception_score,
    kernel_distance,
    load_generator,
    run_cli,
    sample_time_pair,
)

__all__ = [
    "Config",
    "Generator",
    "desk_config",
    "frechet_distance",
    "inception_score",
    "kernel_distance",
    "load_generator",
    "run_cli",
    "sample_time_pair",
]
