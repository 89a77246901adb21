"""Conditional sketch module: CVAE conditioned on a six-part silhouette.

The condition network mirrors the data encoder. Its first-layer feature
map is concatenated to the data encoder's first-layer output to form the
posterior input; its deterministic bottleneck code y joins z at the
decoder bottleneck. The KL term is applied to the z posterior only.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..nn.blocks import down_block, init_weights
from ..nn.losses import categorical_nll, kl_standard_normal, reparameterize
from ..palette import N_SILHOUETTE_PARTS
from .sketch_vae import ConvDecoder, one_hot_maps


class _FirstLayerEncoder(nn.Module):
    """Strided-conv encoder exposing its first-layer feature map."""

    def __init__(self, in_channels: int, resolution: int, out_dim: int,
                 base: int = 32, first_out: int | None = None):
        super().__init__()
        self.first = down_block(in_channels, base, norm=False)
        cin = first_out if first_out is not None else base
        chans = [cin]
        size = resolution // 2
        blocks = []
        while size > 4:
            blocks.append(down_block(chans[-1], min(max(chans[-1], base) * 2, 256)))
            chans.append(min(max(chans[-1], base) * 2, 256))
            size //= 2
        self.rest = nn.Sequential(*blocks)
        self.head = nn.Linear(chans[-1] * size * size, out_dim)

    def forward(self, x, extra_first: torch.Tensor | None = None):
        f1 = self.first(x)
        h = f1 if extra_first is None else torch.cat([f1, extra_first], dim=1)
        return self.head(self.rest(h).flatten(1)), f1


class ConditionalSketchVae(nn.Module):
    def __init__(self, num_classes: int = 10, resolution: int = 64,
                 latent_dim: int = 64, cond_dim: int = 64,
                 kl_weight: float = 6.55):
        super().__init__()
        if kl_weight <= 0:
            raise ValueError("kl_weight must be positive")
        self.num_classes = num_classes
        self.resolution = resolution
        self.latent_dim = latent_dim
        self.cond_dim = cond_dim
        self.kl_weight = kl_weight
        base = 32
        self.cond_encoder = _FirstLayerEncoder(
            N_SILHOUETTE_PARTS, resolution, cond_dim, base=base)
        # The data encoder's trunk consumes its own first layer concatenated
        # with the condition network's first layer.
        self.data_encoder = _FirstLayerEncoder(
            num_classes, resolution, 2 * latent_dim, base=base,
            first_out=2 * base)
        self.decoder = ConvDecoder(latent_dim + cond_dim, resolution,
                                   num_classes)
        init_weights(self)

    def encode_condition(self, sil: np.ndarray | torch.Tensor):
        """Deterministic silhouette encoding: (code y, first-layer features)."""
        y_onehot = one_hot_maps(sil, N_SILHOUETTE_PARTS).to(
            next(self.parameters()).device)
        if y_onehot.shape[-2:] != (self.resolution, self.resolution):
            raise ValueError("silhouette resolution mismatch")
        return self.cond_encoder(y_onehot)

    def encode(self, x_onehot: torch.Tensor, cond_first: torch.Tensor):
        out, _ = self.data_encoder(x_onehot, extra_first=cond_first)
        mu, logvar = out.chunk(2, dim=-1)
        return mu, logvar

    def decode(self, y: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(torch.cat([z, y], dim=-1))

    def cvae_loss(self, labels, sil, eps: torch.Tensor | None = None):
        """(recon_nll, kl, total) for paired (sketch, silhouette) batches.

        The KL involves only the z posterior; y enters reconstruction only.
        """
        x = one_hot_maps(labels, self.num_classes).to(
            next(self.parameters()).device)
        labels_t = torch.as_tensor(np.asarray(labels), dtype=torch.long)
        if labels_t.dim() == 2:
            labels_t = labels_t[None]
        y, cond_first = self.encode_condition(sil)
        if y.shape[0] != x.shape[0]:
            raise ValueError("unpaired sketch/silhouette batch")
        mu, logvar = self.encode(x, cond_first)
        if eps is None:
            eps = torch.randn_like(mu)
        z = reparameterize(mu, logvar, eps)
        logits = self.decode(y, z)
        recon = categorical_nll(logits, labels_t)
        kl = kl_standard_normal(mu, logvar)
        total = recon + self.kl_weight * kl
        return recon, kl, total

    @torch.no_grad()
    def sample_conditioned(self, sil, n: int, seed: int) -> np.ndarray:
        """n sketches sharing the pose given by one silhouette; variation
        comes only from z ~ N(0, I)."""
        self.eval()
        if n == 0:
            return np.zeros((0, self.resolution, self.resolution), dtype=np.uint8)
        y, _ = self.encode_condition(sil)
        if y.shape[0] != 1:
            raise ValueError("expected a single silhouette")
        gen = torch.Generator().manual_seed(seed)
        z = torch.randn(n, self.latent_dim, generator=gen)
        logits = self.decode(y.expand(n, -1), z)
        return logits.argmax(dim=1).cpu().numpy().astype(np.uint8)
