"""Compact U-shaped segmentation network for the cross-evaluation study."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..nn.blocks import LRELU_SLOPE, init_weights


class SegModel(nn.Module):
    """Small encoder-decoder segmenter; output resolution equals input."""

    def __init__(self, num_classes: int = 10, base: int = 32):
        super().__init__()
        self.num_classes = num_classes
        self.d1 = nn.Sequential(
            nn.Conv2d(3, base, 4, 2, 1),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True))
        self.d2 = nn.Sequential(
            nn.Conv2d(base, base * 2, 4, 2, 1, bias=False),
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True))
        self.d3 = nn.Sequential(
            nn.Conv2d(base * 2, base * 4, 4, 2, 1, bias=False),
            nn.BatchNorm2d(base * 4),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True))
        self.u3 = nn.Sequential(
            nn.ConvTranspose2d(base * 4, base * 2, 4, 2, 1, bias=False),
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True))
        self.u2 = nn.Sequential(
            nn.ConvTranspose2d(base * 4, base, 4, 2, 1, bias=False),
            nn.BatchNorm2d(base),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True))
        self.u1 = nn.ConvTranspose2d(base * 2, num_classes, 4, 2, 1)
        init_weights(self)

    def forward(self, x):
        h1 = self.d1(x)
        h2 = self.d2(h1)
        h3 = self.d3(h2)
        u = self.u3(h3)
        u = self.u2(torch.cat([u, h2], dim=1))
        return self.u1(torch.cat([u, h1], dim=1))

    @torch.no_grad()
    def predict(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """(N, H, W, 3) float images -> (N, H, W) argmax label maps."""
        self.eval()
        out = []
        x = torch.as_tensor(np.asarray(images), dtype=torch.float32).permute(0, 3, 1, 2)
        for i in range(0, x.shape[0], batch_size):
            logits = self(x[i:i + batch_size])
            out.append(logits.argmax(dim=1).cpu().numpy().astype(np.uint8))
        return np.concatenate(out) if out else np.zeros((0,), dtype=np.uint8)
