"""Cross train/test segmentation study over three data sources.

Sources: "real" (forged ground truth), "full-synthetic" (sampled sketches
textured by the portray module) and "synthetic-texture" (ground-truth
sketches textured by the portray module). Every source gets composited
procedural backgrounds; each source uses its own texture style, mirroring
the background domain gap between photographs and pasted scene crops.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .dataset_io import FigureDataset, write_dataset
from .forge import composite_background
from .metrics import format_metrics_table, mean_iou, pixel_accuracy
from .models.segmenter import SegModel
from .train import TrainConfig, train_segmenter

SOURCES = ("full-synthetic", "synthetic-texture", "real")

BG_STYLES = {"full-synthetic": 0, "synthetic-texture": 1, "real": 2}

# Fixed per-source color rotations standing in for the distinct color
# statistics of each rendering pipeline: a segmenter only reads a source
# reliably after training under the same transform.
COLOR_ROLL = {"full-synthetic": 1, "synthetic-texture": 2, "real": 0}


def domain_tint(images: np.ndarray, source: str) -> np.ndarray:
    """Apply the source's global channel rotation to (..., 3) images."""
    return np.roll(images, COLOR_ROLL[source], axis=-1)


@dataclass
class CrossMatrix:
    sources: tuple
    iou: np.ndarray        # (3, 3) train x test
    accuracy: np.ndarray

    def as_dict(self) -> dict:
        return {
            "sources": list(self.sources),
            "iou": self.iou.tolist(),
            "accuracy": self.accuracy.tolist(),
        }

    def as_table(self) -> str:
        headers = ["train \\ test"] + list(self.sources)
        rows = []
        for i, src in enumerate(self.sources):
            rows.append([src] + [
                f"{self.iou[i, j]:.3f} / {self.accuracy[i, j]:.3f}"
                for j in range(len(self.sources))])
        return format_metrics_table(rows, headers)


def _composite_all(labels: np.ndarray, images: np.ndarray, seed: int,
                   style: int) -> np.ndarray:
    out = np.empty_like(images)
    for i in range(len(images)):
        out[i] = composite_background(images[i], labels[i], seed + i, style)
    return out


def generate_synthetic_dataset(sketch_model, portray_model, palette, n: int,
                               seed: int, out_dir=None, bg_style: int = 0):
    """Sample n sketches and portray them; labels are the sampled sketches.

    Returns (labels, images); also writes the figure-forge on-disk layout
    when out_dir is given (silhouettes are all-background placeholders,
    since the unconditional pipeline has none).
    """
    labels = sketch_model.sample(n, seed)
    images = np.stack([
        portray_model.colorize(portray_model.prepare_sketch(lab, palette))
        for lab in labels])
    images = _composite_all(labels, images, seed, bg_style)
    if out_dir is not None:
        res = labels.shape[-1] if n else sketch_model.resolution
        sil = np.zeros((res, res), dtype=np.uint8)
        write_dataset(out_dir, ((lab, img, sil) for lab, img in zip(labels, images)),
                      palette, res, seed)
    return labels, images


def make_texture_dataset(dataset: FigureDataset, portray_model, seed: int,
                         out_dir=None, bg_style: int = 1):
    """Pair the source dataset's ground-truth labels with portray textures."""
    labels = dataset.labels()
    images = np.stack([
        portray_model.colorize(portray_model.prepare_sketch(lab, dataset.palette))
        for lab in labels])
    images = _composite_all(labels, images, seed, bg_style)
    if out_dir is not None:
        write_dataset(out_dir, ((lab, img, dataset.silhouette(i))
                                for i, (lab, img) in enumerate(zip(labels, images))),
                      dataset.palette, dataset.resolution, seed)
    return labels, images


def real_with_backgrounds(dataset: FigureDataset, seed: int,
                          bg_style: int = 2):
    labels = dataset.labels()
    images = _composite_all(labels, dataset.rgbs(), seed, bg_style)
    return labels, images


def cross_evaluate(train_sets: dict, test_sets: dict, num_classes: int,
                   cfg: TrainConfig, work_dir) -> CrossMatrix:
    """Train one segmenter per source and evaluate it on every test set.

    train_sets / test_sets map source name -> (images (N,H,W,3), labels).
    """
    for src in SOURCES:
        if src not in train_sets or src not in test_sets:
            raise ValueError(f"missing data source {src!r}")
    work_dir = Path(work_dir)
    iou = np.zeros((len(SOURCES), len(SOURCES)))
    acc = np.zeros_like(iou)
    for i, src in enumerate(SOURCES):
        images, labels = train_sets[src]
        # seed before construction: init draws from the global generator
        torch.manual_seed(cfg.seed)
        model = SegModel(num_classes=num_classes)
        train_segmenter(model, images, labels, cfg,
                        work_dir / f"segmenter_{src}",
                        log_path=work_dir / f"segmenter_{src}.jsonl")
        for j, tgt in enumerate(SOURCES):
            timages, tlabels = test_sets[tgt]
            preds = model.predict(timages)
            iou[i, j] = mean_iou(preds, tlabels, num_classes)
            acc[i, j] = pixel_accuracy(preds, tlabels)
    return CrossMatrix(sources=SOURCES, iou=iou, accuracy=acc)
