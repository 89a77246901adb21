"""Portray module: sketch-to-image translation with skip connections.

The generator is a U-shaped encoder-decoder whose mirrored layers are
concatenated, with a sigmoid 3-channel output. Input is either a
palette-rendered color map (3 channels) or a C-channel probability map,
optionally concatenated with a per-segment color-conditioning map.
A small patch discriminator provides the adversarial term.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..nn.blocks import LRELU_SLOPE, init_weights
from ..palette import ClassPalette


def render_color_map(labels: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Label map -> exact-palette-color float image in [0, 1]."""
    lut = np.asarray(palette.colors, dtype=np.float64) / 255.0
    return lut[np.asarray(labels)]


class UNetGenerator(nn.Module):
    def __init__(self, in_channels: int, resolution: int = 64, base: int = 64,
                 use_skips: bool = True):
        super().__init__()
        self.use_skips = use_skips
        depth = 0
        size = resolution
        chans = [in_channels]
        while size > 4:
            chans.append(min(base * (2 ** depth), 256))
            depth += 1
            size //= 2
        self.downs = nn.ModuleList()
        for i in range(depth):
            block = [nn.Conv2d(chans[i], chans[i + 1], 4, 2, 1,
                               bias=(i == 0))]
            if i > 0:
                block.append(nn.BatchNorm2d(chans[i + 1]))
            block.append(nn.LeakyReLU(LRELU_SLOPE, inplace=True))
            self.downs.append(nn.Sequential(*block))
        self.ups = nn.ModuleList()
        for i in reversed(range(1, depth)):
            cin = chans[i + 1] if i == depth - 1 else chans[i + 1] * (2 if use_skips else 1)
            self.ups.append(nn.Sequential(
                nn.ConvTranspose2d(cin, chans[i], 4, 2, 1, bias=False),
                nn.BatchNorm2d(chans[i]),
                nn.LeakyReLU(LRELU_SLOPE, inplace=True)))
        cin = chans[1] * (2 if use_skips else 1)
        self.final = nn.ConvTranspose2d(cin, 3, 4, 2, 1)

    def forward(self, x):
        feats = []
        h = x
        for d in self.downs:
            h = d(h)
            feats.append(h)
        h = feats[-1]
        for i, u in enumerate(self.ups):
            if i > 0 and self.use_skips:
                h = torch.cat([h, feats[len(self.downs) - 1 - i]], dim=1)
            h = u(h)
        if self.use_skips:
            h = torch.cat([h, feats[0]], dim=1)
        return torch.sigmoid(self.final(h))


class PatchDiscriminator(nn.Module):
    """Patch classifier with a 16x16-pixel receptive field at stride 4."""

    def __init__(self, in_channels: int, base: int = 64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, base, 4, 2, 1),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True),
            nn.Conv2d(base, base * 2, 4, 2, 1, bias=False),
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(LRELU_SLOPE, inplace=True),
            nn.Conv2d(base * 2, 1, 3, 1, 1),
        )

    def forward(self, x):
        return self.net(x)


class PortrayModel(nn.Module):
    """Generator/discriminator pair with a configured sketch input mode."""

    INPUT_MODES = ("color-map", "probability-map")

    def __init__(self, num_classes: int = 10, resolution: int = 64,
                 input_mode: str = "color-map", color_conditioned: bool = False,
                 use_skips: bool = True):
        super().__init__()
        if input_mode not in self.INPUT_MODES:
            raise ValueError(f"unknown input mode {input_mode!r}")
        self.num_classes = num_classes
        self.resolution = resolution
        self.input_mode = input_mode
        self.color_conditioned = color_conditioned
        self.use_skips = use_skips
        sketch_ch = 3 if input_mode == "color-map" else num_classes
        in_ch = sketch_ch + (3 if color_conditioned else 0)
        self.in_channels = in_ch
        self.generator = UNetGenerator(in_ch, resolution, use_skips=use_skips)
        self.discriminator = PatchDiscriminator(in_ch + 3)
        init_weights(self)

    def sketch_tensor(self, sketch: np.ndarray | torch.Tensor,
                      color_map: np.ndarray | None = None) -> torch.Tensor:
        """Validate and convert a sketch (plus optional color-conditioning
        map) to the generator's input tensor."""
        s = torch.as_tensor(np.asarray(sketch), dtype=torch.float32)
        if s.dim() == 3:
            s = s[None]
        if s.shape[1] == 3 and self.input_mode != "color-map":
            raise ValueError("model expects probability-map input")
        if s.shape[1] == self.num_classes and self.input_mode == "probability-map":
            sums = s.sum(dim=1)
            if not torch.allclose(sums, torch.ones_like(sums), atol=1e-5):
                raise ValueError("probability map does not sum to 1 per pixel")
        elif s.shape[1] != 3:
            raise ValueError("sketch channel count does not match input mode")
        if self.color_conditioned:
            if color_map is None:
                raise ValueError("model requires a color-conditioning map")
            c = torch.as_tensor(np.asarray(color_map), dtype=torch.float32)
            if c.dim() == 3:
                c = c[None]
            s = torch.cat([s, c], dim=1)
        elif color_map is not None:
            raise ValueError("model was not trained with color conditioning")
        return s

    @torch.no_grad()
    def colorize(self, sketch, color_map=None) -> np.ndarray:
        """Deterministic RGB output in [0, 1], shape (H, W, 3)."""
        self.eval()
        x = self.sketch_tensor(sketch, color_map)
        out = self.generator(x)
        return out[0].permute(1, 2, 0).cpu().numpy().astype(np.float64)

    @torch.no_grad()
    def colorize_with_colors(self, labels: np.ndarray, palette: ClassPalette,
                             colors: dict) -> np.ndarray:
        """Colorize a label-map sketch steering each segment toward a
        requested RGB color (values in [0, 1], keyed by class name)."""
        if not self.color_conditioned:
            raise ValueError("model was not trained with color conditioning")
        labels = np.asarray(labels)
        present = [palette.names[i] for i in np.unique(labels) if i != 0]
        missing = [n for n in present if n not in colors]
        if missing:
            raise ValueError(f"missing colors for classes: {missing}")
        cmap = np.zeros(labels.shape + (3,))
        for name in present:
            cmap[labels == palette.index(name)] = colors[name]
        sketch = self.prepare_sketch(labels, palette)
        return self.colorize(sketch, cmap.transpose(2, 0, 1))

    def prepare_sketch(self, labels: np.ndarray,
                       palette: ClassPalette) -> np.ndarray:
        """Label map -> (C or 3, H, W) input in the configured mode."""
        labels = np.asarray(labels)
        if self.input_mode == "color-map":
            return render_color_map(labels, palette).transpose(2, 0, 1)
        eye = np.eye(self.num_classes)
        return eye[labels].transpose(2, 0, 1)
