"""Mask hygiene for label maps: hole filling, IoU, per-segment colors."""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def clean_mask(m: np.ndarray, kernel: int = 7) -> np.ndarray:
    """Fill spurious background holes smaller than the structuring element.

    Background components are kept only where a kernel x kernel square fits
    entirely inside the background (an opening of the background mask, with
    the area outside the canvas treated as background). Removed components
    are relabeled to the majority class on their boundary, ties going to
    the lowest class index.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 1")
    m = np.asarray(m)
    if kernel == 1:
        return m.copy()
    bg = m == 0
    pad = kernel
    padded = np.pad(bg, pad, constant_values=True)
    opened = ndimage.binary_opening(padded, structure=np.ones((kernel, kernel), bool))
    holes = bg & ~opened[pad:-pad, pad:-pad]
    out = m.copy()
    if not holes.any():
        return out
    comps, n = ndimage.label(holes, structure=np.ones((3, 3), int))
    for i in range(1, n + 1):
        comp = comps == i
        ring = ndimage.binary_dilation(comp, structure=np.ones((3, 3), bool)) & ~comp
        neighbors = m[ring & (m > 0)]
        if neighbors.size == 0:
            continue
        counts = np.bincount(neighbors)
        out[comp] = int(np.argmax(counts))
    return out


def inject_holes(m: np.ndarray, seed: int, count: int, max_size: int = 3) -> np.ndarray:
    """Carve `count` square background holes strictly inside class regions.

    Each hole has side <= max_size and is surrounded by a single class, so
    a subsequent clean_mask restores the original exactly. Deterministic
    per seed; raises if the map lacks enough interior area.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    m = np.asarray(m)
    if count == 0:
        return m.copy()
    rng = np.random.default_rng(np.random.SeedSequence([0x40E5, seed]))
    out = m.copy()
    blocked = np.zeros(m.shape, dtype=bool)
    placed = 0
    for _ in range(count):
        size = int(rng.integers(1, max_size + 1))
        win = size + 2
        # Positions whose (size+2)-window is one uniform foreground class.
        mx = ndimage.maximum_filter(m, size=win, mode="constant", cval=255)
        mn = ndimage.minimum_filter(m, size=win, mode="constant", cval=0)
        ok = (mx == mn) & (m > 0) & ~ndimage.maximum_filter(
            blocked, size=win + 2, mode="constant", cval=False)
        candidates = np.argwhere(ok)
        if candidates.size == 0:
            raise ValueError("insufficient interior area for requested holes")
        cy, cx = candidates[rng.integers(0, len(candidates))]
        half = win // 2
        y0, x0 = cy - half, cx - half
        out[y0 + 1:y0 + 1 + size, x0 + 1:x0 + 1 + size] = 0
        blocked[y0:y0 + win, x0:x0 + win] = True
        placed += 1
    assert placed == count
    return out


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 if both empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("mask dimensions differ")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def median_color_map(img: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Per-segment constant color map: the per-channel median of each class
    region (lower median for even counts); background maps to black."""
    img = np.asarray(img, dtype=np.float64)
    m = np.asarray(m)
    if img.shape[:2] != m.shape:
        raise ValueError("image and label dimensions differ")
    out = np.zeros_like(img)
    for cls in np.unique(m):
        if cls == 0:
            continue
        region = m == cls
        vals = img[region]
        med = np.sort(vals, axis=0)[(vals.shape[0] - 1) // 2]
        out[region] = med
    return out
