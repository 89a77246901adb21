"""Training loops for the sketch, portray and segmentation models.

All loops are deterministic for a fixed seed in single-threaded mode,
log one JSON record per epoch, keep the best-by-validation checkpoint
and abort on non-finite losses.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .nn.blocks import make_optimizer
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.losses import categorical_nll, gan_losses, kl_standard_normal, reparameterize
from .models.sketch_vae import one_hot_maps


class NumericalError(RuntimeError):
    """Raised when a training loss stops being finite."""


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 2e-4
    betas: tuple = (0.5, 0.999)
    seed: int = 0
    val_frac: float = 0.1
    kl_weight: float | None = None   # None: model.kl_weight / pixel count
    l1_weight: float = 100.0
    adv_weight: float = 0.0
    target_accuracy: float | None = None
    target_l1: float | None = None
    patience: int | None = None
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class EpochLogger:
    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.records = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
        else:
            self._fh = None

    def log(self, record: dict):
        self.records.append(record)
        if self._fh:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()


def _setup(cfg: TrainConfig):
    if cfg.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    return np.random.default_rng(np.random.SeedSequence([0x7124, cfg.seed]))


def _split(n: int, val_frac: float):
    n_val = max(1, int(round(n * val_frac))) if n > 1 else 0
    idx = np.arange(n)
    return idx[:n - n_val], idx[n - n_val:]


def _check_finite(value: float, what: str, epoch: int):
    if not np.isfinite(value):
        raise NumericalError(f"non-finite {what} at epoch {epoch}: {value}")


def _save_epoch(out_dir, module_name, model, optimizer, epoch, val_metric,
                best_so_far, higher_is_better, meta_extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"module": module_name, "epoch": epoch, "val_metric": val_metric}
    meta.update(meta_extra or {})
    save_checkpoint(out_dir / "last.spck", model, meta, optimizer)
    improved = (best_so_far is None
                or (val_metric > best_so_far if higher_is_better
                    else val_metric < best_so_far))
    if improved:
        save_checkpoint(out_dir / "best.spck", model, meta, optimizer)
        return val_metric
    return best_so_far


def _resume_epoch(out_dir, model, optimizer) -> int:
    last = Path(out_dir) / "last.spck"
    if last.exists():
        meta = load_checkpoint(last, model, optimizer)
        return int(meta.get("epoch", 0))
    return 0


@torch.no_grad()
def reconstruction_accuracy(model, labels: np.ndarray, sils=None,
                            batch_size: int = 64) -> float:
    """Pixel accuracy of posterior-mean reconstructions."""
    model.eval()
    correct = total = 0
    for i in range(0, len(labels), batch_size):
        batch = labels[i:i + batch_size]
        x = one_hot_maps(batch, model.num_classes)
        if sils is None:
            mu, _ = model.encode(x)
            logits = model.decode(mu)
        else:
            y, cond_first = model.encode_condition(sils[i:i + batch_size])
            mu, _ = model.encode(x, cond_first)
            logits = model.decode(y, mu)
        pred = logits.argmax(dim=1).cpu().numpy()
        correct += (pred == batch).sum()
        total += pred.size
    return float(correct) / float(total)


def _sketch_epoch(model, labels, sils, order, cfg, w_kl, epoch):
    model.train()
    sums = {"recon": 0.0, "kl": 0.0, "total": 0.0}
    opt = model._train_opt
    n_batches = 0
    for i in range(0, len(order), cfg.batch_size):
        idx = order[i:i + cfg.batch_size]
        batch = labels[idx]
        x = one_hot_maps(batch, model.num_classes)
        labels_t = torch.as_tensor(batch, dtype=torch.long)
        if sils is None:
            mu, logvar = model.encode(x)
        else:
            y, cond_first = model.encode_condition(sils[idx])
            mu, logvar = model.encode(x, cond_first)
        eps = torch.randn_like(mu)
        z = reparameterize(mu, logvar, eps)
        logits = model.decode(z) if sils is None else model.decode(y, z)
        recon = categorical_nll(logits, labels_t)
        kl = kl_standard_normal(mu, logvar)
        loss = recon + w_kl * kl
        _check_finite(loss.item(), "loss", epoch)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sums["recon"] += recon.item()
        sums["kl"] += kl.item()
        sums["total"] += loss.item()
        n_batches += 1
    return {k: v / n_batches for k, v in sums.items()}


def train_sketch_model(model, labels: np.ndarray, cfg: TrainConfig,
                       out_dir, sils: np.ndarray | None = None,
                       log_path=None, extra_meta: dict | None = None) -> list:
    """Train the VAE (sils=None) or CVAE on label maps; returns the epoch
    log records."""
    if len(labels) == 0:
        raise ValueError("empty dataset")
    rng = _setup(cfg)
    module_name = "vae" if sils is None else "cvae"
    w_kl = (cfg.kl_weight if cfg.kl_weight is not None
            else model.kl_weight / float(model.resolution ** 2))
    opt = make_optimizer(model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas))
    model._train_opt = opt
    start_epoch = _resume_epoch(out_dir, model, opt)
    tr_idx, val_idx = _split(len(labels), cfg.val_frac)
    logger = EpochLogger(log_path)
    best = None
    try:
        for epoch in range(start_epoch + 1, cfg.epochs + 1):
            t0 = time.monotonic()
            order = tr_idx.copy()
            rng.shuffle(order)
            stats = _sketch_epoch(model, labels, sils, order, cfg, w_kl, epoch)
            val_sils = sils[val_idx] if sils is not None else None
            val_acc = reconstruction_accuracy(model, labels[val_idx], val_sils)
            train_acc = reconstruction_accuracy(model, labels[tr_idx],
                                                sils[tr_idx] if sils is not None else None)
            record = {"epoch": epoch, "recon_nll": stats["recon"],
                      "kl": stats["kl"], "total": stats["total"],
                      "val_accuracy": val_acc, "train_accuracy": train_acc,
                      "wall_time": time.monotonic() - t0}
            logger.log(record)
            meta = {"kl_weight_effective": w_kl}
            meta.update(extra_meta or {})
            best = _save_epoch(out_dir, module_name, model, opt, epoch,
                               val_acc, best, higher_is_better=True,
                               meta_extra=meta)
            if cfg.target_accuracy is not None and val_acc >= cfg.target_accuracy:
                break
    finally:
        logger.close()
        del model._train_opt
    return logger.records


def _portray_batches(model, inputs, targets, order, cfg, epoch):
    opt_g = model._opt_g
    opt_d = model._opt_d
    sums = {"l1": 0.0, "adv": 0.0, "disc": 0.0, "disc_acc": 0.0}
    n = 0
    for i in range(0, len(order), cfg.batch_size):
        idx = order[i:i + cfg.batch_size]
        x = torch.as_tensor(inputs[idx], dtype=torch.float32)
        y = torch.as_tensor(targets[idx], dtype=torch.float32)
        fake = model.generator(x)
        l1 = F.l1_loss(fake, y)
        if cfg.adv_weight > 0:
            disc = lambda img: model.discriminator(torch.cat([x, img], dim=1))
            d_loss, g_adv = gan_losses(disc, y, fake)
            _check_finite(d_loss.item(), "discriminator loss", epoch)
        else:
            d_loss = torch.zeros(())
            g_adv = torch.zeros(())
        g_loss = cfg.l1_weight * l1 + cfg.adv_weight * g_adv
        _check_finite(g_loss.item(), "generator loss", epoch)
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()
        if cfg.adv_weight > 0:
            with torch.no_grad():
                acc_r = (disc(y) > 0).float().mean()
                acc_f = (disc(fake) < 0).float().mean()
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
        else:
            acc_r = acc_f = torch.tensor(0.5)
        sums["l1"] += l1.item()
        sums["adv"] += g_adv.item()
        sums["disc"] += d_loss.item()
        sums["disc_acc"] += 0.5 * (acc_r.item() + acc_f.item())
        n += 1
    return {k: v / n for k, v in sums.items()}


@torch.no_grad()
def portray_val_l1(model, inputs, targets, batch_size: int = 64) -> float:
    model.eval()
    total = 0.0
    count = 0
    for i in range(0, len(inputs), batch_size):
        x = torch.as_tensor(inputs[i:i + batch_size], dtype=torch.float32)
        y = torch.as_tensor(targets[i:i + batch_size], dtype=torch.float32)
        total += F.l1_loss(model.generator(x), y, reduction="sum").item()
        count += int(np.prod(y.shape))
    return total / count


def train_portray(model, inputs: np.ndarray, targets: np.ndarray,
                  cfg: TrainConfig, out_dir, log_path=None,
                  extra_meta: dict | None = None) -> list:
    """Train the portray generator (and discriminator when adv_weight > 0).

    `inputs` are prepared generator inputs (B, C_in, H, W); `targets` are
    (B, 3, H, W) RGB images in [0, 1].
    """
    if len(inputs) == 0:
        raise ValueError("empty dataset")
    rng = _setup(cfg)
    opt_g = make_optimizer(model.generator.parameters(), lr=cfg.lr,
                           betas=tuple(cfg.betas))
    opt_d = make_optimizer(model.discriminator.parameters(), lr=cfg.lr,
                           betas=tuple(cfg.betas))
    model._opt_g, model._opt_d = opt_g, opt_d
    start_epoch = _resume_epoch(out_dir, model, opt_g)
    tr_idx, val_idx = _split(len(inputs), cfg.val_frac)
    logger = EpochLogger(log_path)
    best = None
    try:
        for epoch in range(start_epoch + 1, cfg.epochs + 1):
            t0 = time.monotonic()
            model.train()
            order = tr_idx.copy()
            rng.shuffle(order)
            stats = _portray_batches(model, inputs, targets, order, cfg, epoch)
            val_l1 = portray_val_l1(model, inputs[val_idx], targets[val_idx])
            record = {"epoch": epoch, "l1": stats["l1"], "adv": stats["adv"],
                      "disc": stats["disc"], "disc_accuracy": stats["disc_acc"],
                      "val_l1": val_l1, "wall_time": time.monotonic() - t0}
            logger.log(record)
            best = _save_epoch(out_dir, "portray", model, opt_g, epoch,
                               val_l1, best, higher_is_better=False,
                               meta_extra=extra_meta)
            if cfg.target_l1 is not None and val_l1 <= cfg.target_l1:
                break
    finally:
        logger.close()
        del model._opt_g, model._opt_d
    return logger.records


@torch.no_grad()
def segmenter_accuracy(model, images, labels, batch_size: int = 64) -> float:
    preds = model.predict(images, batch_size)
    return float((preds == labels).mean())


def train_segmenter(model, images: np.ndarray, labels: np.ndarray,
                    cfg: TrainConfig, out_dir, log_path=None,
                    extra_meta: dict | None = None) -> list:
    """Train the compact segmenter with early stopping on val accuracy."""
    if len(images) == 0:
        raise ValueError("empty dataset")
    rng = _setup(cfg)
    opt = make_optimizer(model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas))
    start_epoch = _resume_epoch(out_dir, model, opt)
    tr_idx, val_idx = _split(len(images), cfg.val_frac)
    logger = EpochLogger(log_path)
    best = None
    since_best = 0
    try:
        for epoch in range(start_epoch + 1, cfg.epochs + 1):
            t0 = time.monotonic()
            model.train()
            order = tr_idx.copy()
            rng.shuffle(order)
            loss_sum = 0.0
            n = 0
            for i in range(0, len(order), cfg.batch_size):
                idx = order[i:i + cfg.batch_size]
                x = torch.as_tensor(images[idx], dtype=torch.float32).permute(0, 3, 1, 2)
                t = torch.as_tensor(labels[idx], dtype=torch.long)
                loss = categorical_nll(model(x), t)
                _check_finite(loss.item(), "loss", epoch)
                opt.zero_grad()
                loss.backward()
                opt.step()
                loss_sum += loss.item()
                n += 1
            val_acc = segmenter_accuracy(model, images[val_idx], labels[val_idx])
            record = {"epoch": epoch, "loss": loss_sum / n,
                      "val_accuracy": val_acc,
                      "wall_time": time.monotonic() - t0}
            logger.log(record)
            prev_best = best
            best = _save_epoch(out_dir, "segmenter", model, opt, epoch,
                               val_acc, best, higher_is_better=True,
                               meta_extra=extra_meta)
            since_best = 0 if best != prev_best else since_best + 1
            if cfg.target_accuracy is not None and val_acc >= cfg.target_accuracy:
                break
            if cfg.patience is not None and since_best >= cfg.patience:
                break
    finally:
        logger.close()
    return logger.records
