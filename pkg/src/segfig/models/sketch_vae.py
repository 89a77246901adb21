"""Latent sketch module: a VAE over label maps for unconditioned sampling."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..nn.blocks import down_block, init_weights, up_block
from ..nn.losses import categorical_nll, kl_standard_normal, reparameterize


def one_hot_maps(labels: np.ndarray | torch.Tensor, num_classes: int) -> torch.Tensor:
    """(B, H, W) integer maps -> (B, C, H, W) float one-hot tensors."""
    t = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    if t.dim() == 2:
        t = t[None]
    return torch.nn.functional.one_hot(t, num_classes).permute(0, 3, 1, 2).float()


class ConvEncoder(nn.Module):
    """Mirrored strided-conv encoder down to a 4x4 bottleneck."""

    def __init__(self, in_channels: int, resolution: int, out_dim: int,
                 base: int = 32):
        super().__init__()
        self.first = down_block(in_channels, base, norm=False)
        chans = [base]
        size = resolution // 2
        blocks = []
        while size > 4:
            blocks.append(down_block(chans[-1], min(chans[-1] * 2, 256)))
            chans.append(min(chans[-1] * 2, 256))
            size //= 2
        self.rest = nn.Sequential(*blocks)
        self.bottleneck_shape = (chans[-1], size, size)
        self.head = nn.Linear(chans[-1] * size * size, out_dim)

    def forward(self, x):
        h = self.rest(self.first(x))
        return self.head(h.flatten(1))


class ConvDecoder(nn.Module):
    """Dense bottleneck followed by fractionally strided convs; no skips
    cross the latent bottleneck."""

    def __init__(self, in_dim: int, resolution: int, out_channels: int,
                 base: int = 32):
        super().__init__()
        size = 4
        chans = [base]
        while size < resolution // 2:
            chans.append(min(chans[-1] * 2, 256))
            size *= 2
        chans = chans[::-1]
        self.start_shape = (chans[0], 4, 4)
        self.head = nn.Linear(in_dim, chans[0] * 16)
        blocks = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            blocks.append(up_block(cin, cout))
        self.stack = nn.Sequential(*blocks)
        self.final = nn.ConvTranspose2d(chans[-1], out_channels, 4, stride=2,
                                        padding=1)

    def forward(self, z):
        h = self.head(z).reshape(z.shape[0], *self.start_shape)
        return self.final(self.stack(h))


class SketchVae(nn.Module):
    """Unconditional sketch VAE with a diagonal Gaussian posterior."""

    def __init__(self, num_classes: int = 10, resolution: int = 64,
                 latent_dim: int = 64, kl_weight: float = 6.55):
        super().__init__()
        if kl_weight <= 0:
            raise ValueError("kl_weight must be positive")
        self.num_classes = num_classes
        self.resolution = resolution
        self.latent_dim = latent_dim
        self.kl_weight = kl_weight
        self.encoder = ConvEncoder(num_classes, resolution, 2 * latent_dim)
        self.decoder = ConvDecoder(latent_dim, resolution, num_classes)
        init_weights(self)

    def encode(self, x_onehot: torch.Tensor):
        """Posterior parameters (mu, logvar) for a batch of one-hot maps."""
        if x_onehot.shape[-2:] != (self.resolution, self.resolution):
            raise ValueError("input resolution mismatch")
        out = self.encoder(x_onehot)
        mu, logvar = out.chunk(2, dim=-1)
        return mu, logvar

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(z)

    def elbo_loss(self, labels: torch.Tensor, eps: torch.Tensor | None = None):
        """Returns (recon_nll, kl, total) with total = recon + w * kl.

        recon_nll is the mean per-pixel categorical NLL; kl is the
        closed-form divergence of the posterior from N(0, I), summed over
        latent dimensions and averaged over the batch.
        """
        x = one_hot_maps(labels, self.num_classes).to(
            next(self.parameters()).device)
        labels_t = torch.as_tensor(np.asarray(labels), dtype=torch.long)
        if labels_t.dim() == 2:
            labels_t = labels_t[None]
        mu, logvar = self.encode(x)
        if eps is None:
            eps = torch.randn_like(mu)
        z = reparameterize(mu, logvar, eps)
        logits = self.decode(z)
        recon = categorical_nll(logits, labels_t)
        kl = kl_standard_normal(mu, logvar)
        total = recon + self.kl_weight * kl
        return recon, kl, total

    @torch.no_grad()
    def sample(self, n: int, seed: int) -> np.ndarray:
        """Decode n prior draws to label maps; the encoder is never used.

        Argmax ties break to the lowest class index.
        """
        self.eval()
        if n == 0:
            return np.zeros((0, self.resolution, self.resolution), dtype=np.uint8)
        gen = torch.Generator().manual_seed(seed)
        z = torch.randn(n, self.latent_dim, generator=gen)
        logits = self.decode(z)
        return logits.argmax(dim=1).cpu().numpy().astype(np.uint8)
