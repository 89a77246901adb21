"""Layer building blocks: strided conv stacks, init, optimizer factory."""

from __future__ import annotations

import torch
from torch import nn

LRELU_SLOPE = 0.2


def lrelu_slope() -> float:
    return LRELU_SLOPE


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Zero-mean normal init (std 0.02) for conv and dense layers."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, std)
            nn.init.zeros_(m.bias)


def down_block(cin: int, cout: int, norm: bool = True) -> nn.Sequential:
    """Stride-2 conv halving spatial size."""
    layers = [nn.Conv2d(cin, cout, 4, stride=2, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.LeakyReLU(LRELU_SLOPE, inplace=True))
    return nn.Sequential(*layers)


def up_block(cin: int, cout: int, norm: bool = True) -> nn.Sequential:
    """Fractionally strided conv doubling spatial size."""
    layers = [nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.LeakyReLU(LRELU_SLOPE, inplace=True))
    return nn.Sequential(*layers)


def make_optimizer(params, lr: float = 2e-4, betas=(0.5, 0.999)) -> torch.optim.Adam:
    """Adaptive-moment optimizer with the image-to-image training regime's
    defaults."""
    return torch.optim.Adam(params, lr=lr, betas=betas)
