"""AQUA-Net: frequency-fusion, illumination-aware underwater image enhancement in numpy."""
from .backbone import (ABLATIONS, AquaNetConfig, AquaNetParams, aquanet_forward, count_flops,
                       count_params, init_params)
from .tensor import Param, Tape, Tensor, backward

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS", "AquaNetConfig", "AquaNetParams", "Param", "Tape", "Tensor",
    "aquanet_forward", "backward", "count_flops", "count_params", "init_params",
]
