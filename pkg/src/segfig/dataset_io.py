"""On-disk dataset layout: manifest.json plus per-sample lossless PNGs.

Per sample NNNN: `NNNN_label.png` (8-bit palette-indexed class map),
`NNNN_rgb.png` (8-bit RGB), `NNNN_sil.png` (8-bit indexed, 7 entries).
Pixel indices are class indices, bit-exact across a save/load round trip.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .palette import (DEFAULT_PALETTE, N_SILHOUETTE_PARTS, SILHOUETTE_COLORS,
                      ClassPalette)


def _flat_palette(colors) -> list:
    flat = []
    for c in colors:
        flat.extend(c)
    flat.extend([0] * (768 - len(flat)))
    return flat


def save_indexed_png(path, data: np.ndarray, colors) -> None:
    img = Image.fromarray(np.asarray(data, dtype=np.uint8), mode="P")
    img.putpalette(_flat_palette(colors))
    img.save(path, format="PNG")


def load_indexed_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img, dtype=np.uint8).copy()


def save_rgb_png(path, img01: np.ndarray) -> None:
    data = np.clip(np.round(np.asarray(img01) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_rgb_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def write_dataset(out_dir, samples, palette: ClassPalette, resolution: int,
                  base_seed: int, config_hash: str = "") -> Path:
    """Write samples [(label, rgb, sil), ...] plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for i, (label, rgb, sil) in enumerate(samples):
        stem = f"{i:04d}"
        save_indexed_png(out / f"{stem}_label.png", label, palette.colors)
        save_rgb_png(out / f"{stem}_rgb.png", rgb)
        save_indexed_png(out / f"{stem}_sil.png", sil,
                         SILHOUETTE_COLORS[:N_SILHOUETTE_PARTS])
        count += 1
    manifest = {
        "count": count,
        "resolution": resolution,
        "class_names": list(palette.names),
        "class_colors": [list(c) for c in palette.colors],
        "base_seed": base_seed,
        "config_hash": config_hash,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


class FigureDataset:
    """Lazy reader over a forged (or generated) dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest.json under {self.root}")
        with open(manifest_path, encoding="utf-8") as fh:
            self.manifest = json.load(fh)
        self.palette = ClassPalette(
            names=tuple(self.manifest["class_names"]),
            colors=tuple(tuple(c) for c in self.manifest["class_colors"]),
        )
        self.resolution = int(self.manifest["resolution"])

    def __len__(self):
        return int(self.manifest["count"])

    def label(self, i: int) -> np.ndarray:
        return load_indexed_png(self.root / f"{i:04d}_label.png")

    def rgb(self, i: int) -> np.ndarray:
        return load_rgb_png(self.root / f"{i:04d}_rgb.png")

    def silhouette(self, i: int) -> np.ndarray:
        return load_indexed_png(self.root / f"{i:04d}_sil.png")

    def labels(self) -> np.ndarray:
        return np.stack([self.label(i) for i in range(len(self))])

    def rgbs(self) -> np.ndarray:
        return np.stack([self.rgb(i) for i in range(len(self))])

    def silhouettes(self) -> np.ndarray:
        return np.stack([self.silhouette(i) for i in range(len(self))])
