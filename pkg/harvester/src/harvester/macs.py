"""Static compute-cost measurement."""

from __future__ import annotations

import torch
from torch.utils.flop_counter import FlopCounterMode


def measure_gmacs(module: torch.nn.Module, resolution: int) -> float:
    """GMACs of one forward pass at the given square resolution, batch size 1.

    The flop counter reports two floating-point operations per multiply-
    accumulate, hence the halving.
    """
    module.eval()
    dummy = torch.zeros(1, 3, resolution, resolution)
    counter = FlopCounterMode(display=False)
    with counter, torch.no_grad():
        module(dummy)
    return counter.get_total_flops() / 2.0 / 1e9
