"""Latent-space analysis: CDF normalization, PCA, and decoded walks.

Protocol: encode a corpus to posterior means, replace each coordinate by
its empirical CDF value (rank / (N+1), average ranks for ties), fit PCA,
take equidistant steps along a principal direction, then invert PCA and
the CDF normalization (piecewise-linear empirical quantiles) and decode
each point back to a sketch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.stats import rankdata

from .models.sketch_vae import one_hot_maps


@dataclass
class PcaBasis:
    mean: np.ndarray            # (d,)
    components: np.ndarray      # (k, d), orthonormal rows
    variances: np.ndarray       # (k,) per-component variance
    variance_ratios: np.ndarray


@torch.no_grad()
def encode_corpus(model, labels: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Posterior means of every sample, as an (N, d) matrix."""
    if len(labels) == 0:
        raise ValueError("empty corpus")
    model.eval()
    rows = []
    for i in range(0, len(labels), batch_size):
        x = one_hot_maps(labels[i:i + batch_size], model.num_classes)
        mu, _ = model.encode(x)
        rows.append(mu.cpu().numpy())
    return np.concatenate(rows).astype(np.float64)


def cdf_normalize(m: np.ndarray) -> np.ndarray:
    """Per-dimension empirical CDF values rank/(N+1), in (0, 1)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    n = m.shape[0]
    return rankdata(m, method="average", axis=0) / (n + 1)


def empirical_quantile(values: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Invert the rank/(N+1) CDF by interpolating order statistics."""
    xs = np.sort(np.asarray(values, dtype=np.float64))
    n = xs.shape[0]
    ps = np.arange(1, n + 1) / (n + 1)
    return np.interp(q, ps, xs)


def invert_cdf(corpus: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-dimension quantile inversion of CDF coordinates q (..., d)."""
    corpus = np.asarray(corpus, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    out = np.empty_like(q)
    for j in range(corpus.shape[1]):
        out[..., j] = empirical_quantile(corpus[:, j], q[..., j])
    return out


def fit_pca(m: np.ndarray) -> PcaBasis:
    """PCA via SVD of the centered matrix, components by descending
    variance; zero-variance input yields zero ratios."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    mean = m.mean(axis=0)
    centered = m - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = s ** 2 / (m.shape[0] - 1)
    total = variances.sum()
    ratios = variances / total if total > 0 else np.zeros_like(variances)
    return PcaBasis(mean=mean, components=vt, variances=variances,
                    variance_ratios=ratios)


def pca_project(basis: PcaBasis, m: np.ndarray) -> np.ndarray:
    return (np.asarray(m) - basis.mean) @ basis.components.T


def pca_reconstruct(basis: PcaBasis, coords: np.ndarray) -> np.ndarray:
    return np.asarray(coords) @ basis.components + basis.mean


@torch.no_grad()
def decode_latents(model, z: np.ndarray) -> np.ndarray:
    """Decode latent rows to argmax label maps."""
    model.eval()
    zt = torch.as_tensor(z, dtype=torch.float32)
    logits = model.decode(zt)
    return logits.argmax(dim=1).cpu().numpy().astype(np.uint8)


def walk(model, corpus: np.ndarray, component: int = 0, extent: float = 1.0,
         steps: int = 10) -> np.ndarray:
    """Decode a walk of `steps` points spanning +-extent standard
    deviations along a principal direction of the CDF-normalized corpus.

    With an odd number of steps the middle frame decodes the PCA mean.
    Returns (steps, H, W) label maps.
    """
    normalized = cdf_normalize(corpus)
    basis = fit_pca(normalized)
    if not 0 <= component < basis.components.shape[0]:
        raise IndexError("component index out of range")
    std = float(np.sqrt(basis.variances[component]))
    if steps == 1:
        ts = np.array([0.0])
    else:
        ts = np.linspace(-extent, extent, steps)
    coords = np.zeros((steps, basis.components.shape[0]))
    coords[:, component] = ts * std
    points = pca_reconstruct(basis, coords)
    # CDF coordinates must stay strictly inside (0, 1) to have a finite
    # quantile preimage.
    n = corpus.shape[0]
    points = np.clip(points, 1.0 / (n + 1), n / (n + 1.0))
    z = invert_cdf(corpus, points)
    return decode_latents(model, z)


def render_contact_sheet(frames: np.ndarray, colors, pad: int = 2) -> np.ndarray:
    """Horizontal contact sheet of palette-rendered frames, (H, W', 3) u8."""
    lut = np.asarray(colors, dtype=np.uint8)
    rendered = [lut[f] for f in frames]
    h = rendered[0].shape[0]
    spacer = np.full((h, pad, 3), 255, dtype=np.uint8)
    parts = []
    for i, r in enumerate(rendered):
        if i:
            parts.append(spacer)
        parts.append(r)
    return np.concatenate(parts, axis=1)
