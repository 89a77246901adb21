"""Losses and the reparameterized sampling step shared by all models."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F


def softmax_over_channels(logits: torch.Tensor) -> torch.Tensor:
    """Per-pixel softmax over the channel axis of a (B, C, H, W) tensor."""
    return torch.softmax(logits, dim=1)


def categorical_nll(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel negative log-likelihood of a categorical decoder.

    `logits` is (B, C, H, W); `labels` is (B, H, W) integer class indices.
    """
    c = logits.shape[1]
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"label outside [0, {c})")
    return F.cross_entropy(logits, labels.long(), reduction="mean")


def kl_standard_normal(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Closed-form KL(q || N(0, I)) for a diagonal Gaussian posterior.

    mu/logvar are (B, d) or (d,); the per-sample KL is
    0.5 * sum_d(mu_d^2 + sigma_d^2 - log sigma_d^2 - 1), averaged over the
    batch if one is present.
    """
    if not torch.isfinite(logvar).all():
        raise ValueError("non-finite log-variance")
    per_dim = 0.5 * (mu.pow(2) + logvar.exp() - logvar - 1.0)
    per_sample = per_dim.sum(dim=-1)
    return per_sample.mean()


def reparameterize(mu: torch.Tensor, logvar: torch.Tensor,
                   eps: torch.Tensor) -> torch.Tensor:
    """z = mu + sigma * eps with sigma = exp(logvar / 2)."""
    return mu + torch.exp(0.5 * logvar) * eps


def gan_losses(disc, real: torch.Tensor, fake: torch.Tensor):
    """Patch-discriminator BCE losses.

    Returns (disc_loss, gen_loss): the discriminator is trained to output 1
    on real and 0 on fake patches; the generator uses the non-saturating
    objective (maximize log D on fakes).
    """
    if real.shape != fake.shape:
        raise ValueError("real and fake batches differ in shape")
    logits_real = disc(real)
    logits_fake = disc(fake.detach())
    disc_loss = (
        F.binary_cross_entropy_with_logits(logits_real, torch.ones_like(logits_real))
        + F.binary_cross_entropy_with_logits(logits_fake, torch.zeros_like(logits_fake))
    ) * 0.5
    logits_gen = disc(fake)
    gen_loss = F.binary_cross_entropy_with_logits(
        logits_gen, torch.ones_like(logits_gen))
    return disc_loss, gen_loss
