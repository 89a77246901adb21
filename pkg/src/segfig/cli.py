"""Command-line orchestration: forge, train, sample, walk, eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
import torch

from .config import ConfigError, RunConfig
from .crosseval import (BG_STYLES, SOURCES, CrossMatrix, cross_evaluate,
                        domain_tint, generate_synthetic_dataset,
                        make_texture_dataset, real_with_backgrounds)
from .dataset_io import (FigureDataset, load_indexed_png, save_indexed_png,
                         save_rgb_png, write_dataset)
from .forge import ForgeConfig, composite_background, generate_sample
from .latent import encode_corpus, render_contact_sheet, walk as latent_walk
from .metrics import format_metrics_table, reconstruction_metrics
from .morphology import clean_mask, median_color_map
from .models.portray import PortrayModel
from .models.segmenter import SegModel
from .models.sketch_cvae import ConditionalSketchVae
from .models.sketch_vae import SketchVae, one_hot_maps
from .nn.checkpoint import CheckpointError, load_checkpoint, read_container
from .palette import DEFAULT_PALETTE, SILHOUETTE_COLORS
from .train import (NumericalError, TrainConfig, train_portray,
                    train_segmenter, train_sketch_model)


class DataError(RuntimeError):
    pass


_MODEL_CLASSES = {"vae": SketchVae, "cvae": ConditionalSketchVae,
                  "portray": PortrayModel, "segmenter": SegModel}


def _train_cfg(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        betas=cfg.betas, seed=cfg.seed, val_frac=cfg.val_frac,
        kl_weight=cfg.effective_kl_weight(), l1_weight=cfg.l1_weight,
        adv_weight=cfg.adv_weight, target_accuracy=cfg.target_accuracy,
        target_l1=cfg.target_l1, patience=cfg.patience,
        deterministic=cfg.deterministic)


def _open_dataset(path) -> FigureDataset:
    try:
        return FigureDataset(path)
    except FileNotFoundError as exc:
        raise DataError(str(exc))


def load_model(path):
    """Rebuild a model of the checkpointed type and restore its weights."""
    if not Path(path).exists():
        raise DataError(f"checkpoint not found: {path}")
    _, meta = read_container(path)
    module = meta.get("module")
    args = meta.get("model_args", {})
    if module not in _MODEL_CLASSES:
        raise DataError(f"{path}: unknown module {module!r} in checkpoint")
    model = _MODEL_CLASSES[module](**args)
    load_checkpoint(path, model)
    model.eval()
    return model, meta


def _require_module(model_meta, expected, path):
    if model_meta.get("module") != expected:
        raise DataError(
            f"{path}: expected a {expected} checkpoint, found "
            f"{model_meta.get('module')!r}")


def _portray_inputs(ds: FigureDataset, model: PortrayModel) -> np.ndarray:
    """Generator inputs for every sample, mask-cleaned first."""
    inputs = []
    for i in range(len(ds)):
        label = clean_mask(ds.label(i))
        sketch = model.prepare_sketch(label, ds.palette)
        if model.color_conditioned:
            cmap = median_color_map(ds.rgb(i), label).transpose(2, 0, 1)
            sketch = np.concatenate([sketch, cmap], axis=0)
        inputs.append(sketch)
    return np.stack(inputs).astype(np.float32)


@click.group()
def cli():
    """Two-stage generative model of segmented figures."""


@cli.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--count", type=int)
@click.option("--seed", type=int)
@click.option("--resolution", type=int)
def forge(out, config_path, count, seed, resolution):
    """Forge a paired dataset of label maps, RGB images and silhouettes."""
    cfg = RunConfig.load(config_path, {"count": count, "seed": seed,
                                       "resolution": resolution})
    forge_cfg = ForgeConfig(resolution=cfg.resolution)
    out_path = Path(out)
    try:
        out_path.mkdir(parents=True, exist_ok=True)
        probe = out_path / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise DataError(f"output path not writable: {out}: {exc}")

    def samples():
        for i in range(cfg.count):
            label, rgb, sil, _ = generate_sample(cfg.seed + i, forge_cfg)
            yield clean_mask(label), rgb, sil

    write_dataset(out_path, samples(), forge_cfg.palette, cfg.resolution,
                  cfg.seed, cfg.config_hash)
    cfg.write_provenance(out_path)
    click.echo(f"forged {cfg.count} samples into {out_path}")


@cli.command()
@click.argument("module", type=click.Choice(["vae", "cvae", "portray",
                                             "segmenter"]))
@click.option("--data", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--epochs", type=int)
@click.option("--seed", type=int)
@click.option("--batch-size", type=int)
@click.option("--adv-weight", type=float)
@click.option("--input-mode", type=click.Choice(["color-map",
                                                 "probability-map"]))
@click.option("--color-conditioned", is_flag=True, default=None)
@click.option("--no-skips", is_flag=True, default=False,
              help="Ablation: drop the portray generator's skip connections.")
def train(module, data, out, config_path, epochs, seed, batch_size,
          adv_weight, input_mode, color_conditioned, no_skips):
    """Train one module; checkpoints land in OUT (resumable from last.spck)."""
    overrides = {"epochs": epochs, "seed": seed, "batch_size": batch_size,
                 "adv_weight": adv_weight, "input_mode": input_mode,
                 "color_conditioned": color_conditioned}
    if no_skips:
        overrides["use_skips"] = False
    cfg = RunConfig.load(config_path, overrides)
    ds = _open_dataset(data)
    tcfg = _train_cfg(cfg)
    # weight initialization draws from the global generator, so seed before
    # constructing the model to keep repeated runs identical
    torch.manual_seed(tcfg.seed)
    out_path = Path(out)
    num_classes = len(ds.palette)
    log_path = out_path / "train.jsonl"
    meta = {"config_hash": cfg.config_hash}
    if module == "vae":
        model = SketchVae(num_classes, cfg.resolution, cfg.latent_dim,
                          cfg.kl_weight)
        meta["model_args"] = {"num_classes": num_classes,
                              "resolution": cfg.resolution,
                              "latent_dim": cfg.latent_dim,
                              "kl_weight": cfg.kl_weight}
        train_sketch_model(model, ds.labels(), tcfg, out_path,
                           log_path=log_path, extra_meta=meta)
    elif module == "cvae":
        model = ConditionalSketchVae(num_classes, cfg.resolution,
                                     cfg.latent_dim, cfg.cond_dim,
                                     cfg.kl_weight)
        meta["model_args"] = {"num_classes": num_classes,
                              "resolution": cfg.resolution,
                              "latent_dim": cfg.latent_dim,
                              "cond_dim": cfg.cond_dim,
                              "kl_weight": cfg.kl_weight}
        train_sketch_model(model, ds.labels(), tcfg, out_path,
                           sils=ds.silhouettes(), log_path=log_path,
                           extra_meta=meta)
    elif module == "portray":
        model = PortrayModel(num_classes, cfg.resolution, cfg.input_mode,
                             cfg.color_conditioned, use_skips=cfg.use_skips)
        meta["model_args"] = {"num_classes": num_classes,
                              "resolution": cfg.resolution,
                              "input_mode": cfg.input_mode,
                              "color_conditioned": cfg.color_conditioned,
                              "use_skips": cfg.use_skips}
        inputs = _portray_inputs(ds, model)
        targets = ds.rgbs().transpose(0, 3, 1, 2).astype(np.float32)
        train_portray(model, inputs, targets, tcfg, out_path,
                      log_path=log_path, extra_meta=meta)
    else:
        model = SegModel(num_classes)
        meta["model_args"] = {"num_classes": num_classes}
        train_segmenter(model, ds.rgbs(), ds.labels(), tcfg, out_path,
                        log_path=log_path, extra_meta=meta)
    cfg.write_provenance(out_path)
    click.echo(f"trained {module}; checkpoints in {out_path}")


@cli.command()
@click.option("--mode", required=True,
              type=click.Choice(["unconditional", "pose-conditioned",
                                 "full-pipeline", "color-conditioned"]))
@click.option("--out", required=True, type=click.Path())
@click.option("--vae", "vae_path", type=click.Path())
@click.option("--cvae", "cvae_path", type=click.Path())
@click.option("--portray", "portray_path", type=click.Path())
@click.option("--silhouette", "sil_path", type=click.Path())
@click.option("--colors", "colors_path", type=click.Path(),
              help="JSON: {class-name: [r,g,b]} or a list of such maps.")
@click.option("--sketch", "sketch_path", type=click.Path(),
              help="Label-map PNG for color-conditioned mode.")
@click.option("-n", "n_samples", type=int, default=4)
@click.option("--seed", type=int, default=0)
@click.option("--config", "config_path", type=click.Path(exists=True))
def sample(mode, out, vae_path, cvae_path, portray_path, sil_path,
           colors_path, sketch_path, n_samples, seed, config_path):
    """Draw samples; full-pipeline chains sketch, portray and background."""
    cfg = RunConfig.load(config_path, {"n_samples": n_samples, "seed": seed})
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    palette = DEFAULT_PALETTE

    def need(path, what):
        if path is None:
            raise DataError(f"mode {mode!r} requires --{what}")
        return path

    if mode in ("unconditional", "full-pipeline"):
        vae, _ = load_model(need(vae_path, "vae"))
        portray_model, _ = load_model(need(portray_path, "portray"))
        sketches = vae.sample(cfg.n_samples, cfg.seed)
        for i, sk in enumerate(sketches):
            rgb = portray_model.colorize(portray_model.prepare_sketch(sk, palette))
            if mode == "full-pipeline":
                rgb = composite_background(rgb, sk, cfg.seed + i)
            save_indexed_png(out_path / f"{i:04d}_sketch.png", sk, palette.colors)
            save_rgb_png(out_path / f"{i:04d}_rgb.png", rgb)
    elif mode == "pose-conditioned":
        cvae, _ = load_model(need(cvae_path, "cvae"))
        sil = load_indexed_png(need(sil_path, "silhouette"))
        sketches = cvae.sample_conditioned(sil, cfg.n_samples, cfg.seed)
        portray_model = None
        if portray_path:
            portray_model, _ = load_model(portray_path)
        for i, sk in enumerate(sketches):
            save_indexed_png(out_path / f"{i:04d}_sketch.png", sk, palette.colors)
            if portray_model is not None:
                rgb = portray_model.colorize(
                    portray_model.prepare_sketch(sk, palette))
                save_rgb_png(out_path / f"{i:04d}_rgb.png", rgb)
    else:  # color-conditioned
        portray_model, _ = load_model(need(portray_path, "portray"))
        sketch = load_indexed_png(need(sketch_path, "sketch"))
        with open(need(colors_path, "colors"), encoding="utf-8") as fh:
            colors = json.load(fh)
        color_sets = colors if isinstance(colors, list) else [colors]
        for i, cset in enumerate(color_sets):
            rgb = portray_model.colorize_with_colors(sketch, palette, cset)
            save_rgb_png(out_path / f"{i:04d}_rgb.png", rgb)
    cfg.write_provenance(out_path)
    click.echo(f"samples written to {out_path}")


@cli.command(name="walk")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--steps", type=int)
@click.option("--component", type=int)
@click.option("--extent", type=float)
@click.option("--config", "config_path", type=click.Path(exists=True))
def walk_cmd(checkpoint, data, out, steps, component, extent, config_path):
    """Decode a latent walk along a principal direction (contact sheet)."""
    cfg = RunConfig.load(config_path, {"walk_steps": steps,
                                       "walk_component": component,
                                       "walk_extent": extent})
    if cfg.walk_steps % 2 == 0:
        raise click.UsageError("steps must be odd so the mean sits centered")
    model, meta = load_model(checkpoint)
    _require_module(meta, "vae", checkpoint)
    ds = _open_dataset(data)
    corpus = encode_corpus(model, ds.labels())
    frames = latent_walk(model, corpus, cfg.walk_component, cfg.walk_extent,
                         cfg.walk_steps)
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_indexed_png(out_path / f"frame_{i:03d}.png", frame,
                         ds.palette.colors)
    sheet = render_contact_sheet(frames, ds.palette.colors)
    from PIL import Image
    Image.fromarray(sheet, mode="RGB").save(out_path / "contact_sheet.png")
    cfg.write_provenance(out_path)
    click.echo(f"{len(frames)} frames + contact sheet in {out_path}")


@cli.command(name="eval")
@click.option("--mode", required=True, type=click.Choice(["recon", "cross"]))
@click.option("--data", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--checkpoint", type=click.Path(),
              help="Sketch checkpoint (recon mode).")
@click.option("--vae", "vae_path", type=click.Path())
@click.option("--portray", "portray_path", type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--epochs", type=int)
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_cmd(mode, data, out, checkpoint, vae_path, portray_path, seed,
             epochs, config_path):
    """Reconstruction metrics or the 3x3 cross train/test matrix."""
    cfg = RunConfig.load(config_path, {"seed": seed, "epochs": epochs})
    ds = _open_dataset(data)
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    if mode == "recon":
        if checkpoint is None:
            raise DataError("recon mode requires --checkpoint")
        model, meta = load_model(checkpoint)
        if meta.get("module") not in ("vae", "cvae"):
            raise DataError(f"{checkpoint}: not a sketch checkpoint")
        labels = ds.labels()
        import torch
        with torch.no_grad():
            preds = []
            for i in range(0, len(labels), 64):
                batch = labels[i:i + 64]
                x = one_hot_maps(batch, model.num_classes)
                if meta["module"] == "vae":
                    mu, _ = model.encode(x)
                    logits = model.decode(mu)
                else:
                    y, cond_first = model.encode_condition(
                        ds.silhouettes()[i:i + 64])
                    mu, _ = model.encode(x, cond_first)
                    logits = model.decode(y, mu)
                preds.append(logits.argmax(dim=1).cpu().numpy())
        preds = np.concatenate(preds)
        metrics = reconstruction_metrics(preds, labels, model.num_classes)
        payload = metrics.as_dict()
        payload["config_hash"] = cfg.config_hash
        with open(out_path / "recon_metrics.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        rows = [[ds.palette.names[c],
                 f"{m['accuracy']:.3f}", f"{m['precision']:.3f}",
                 f"{m['recall']:.3f}", f"{m['f1']:.3f}"]
                for c, m in metrics.per_class.items()]
        rows.append(["macro", f"{metrics.macro_accuracy:.3f}",
                     f"{metrics.macro_precision:.3f}",
                     f"{metrics.macro_recall:.3f}", f"{metrics.macro_f1:.3f}"])
        table = format_metrics_table(
            rows, ["class", "accuracy", "precision", "recall", "f1"])
        (out_path / "recon_metrics.txt").write_text(table + "\n")
        click.echo(table)
    else:
        if vae_path is None or portray_path is None:
            raise DataError("cross mode requires --vae and --portray")
        vae, _ = load_model(vae_path)
        portray_model, _ = load_model(portray_path)
        if getattr(portray_model, "color_conditioned", False):
            raise DataError("cross mode needs a renderer trained without "
                            "color conditioning")
        matrix = run_cross_matrix(ds, vae, portray_model, cfg, out_path)
        payload = matrix.as_dict()
        payload["config_hash"] = cfg.config_hash
        with open(out_path / "cross_matrix.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        table = matrix.as_table()
        (out_path / "cross_matrix.txt").write_text(table + "\n")
        click.echo(table)
    cfg.write_provenance(out_path)


def run_cross_matrix(ds: FigureDataset, vae, portray_model, cfg: RunConfig,
                     work_dir) -> CrossMatrix:
    """Assemble the three data sources and compute the cross matrix."""
    n = len(ds)
    split = max(1, int(round(n * 0.8)))
    num_classes = len(ds.palette)
    real_labels, real_images = real_with_backgrounds(ds, seed=cfg.seed,
                                                     bg_style=BG_STYLES["real"])
    synth_labels, synth_images = generate_synthetic_dataset(
        vae, portray_model, ds.palette, n, seed=cfg.seed + 1,
        bg_style=BG_STYLES["full-synthetic"])
    tex_labels, tex_images = make_texture_dataset(
        ds, portray_model, seed=cfg.seed + 2,
        bg_style=BG_STYLES["synthetic-texture"])
    real_images = domain_tint(real_images, "real")
    synth_images = domain_tint(synth_images, "full-synthetic")
    tex_images = domain_tint(tex_images, "synthetic-texture")
    def parts(images, labels):
        return ((images[:split], labels[:split]),
                (images[split:], labels[split:]))
    data = {"real": parts(real_images, real_labels),
            "full-synthetic": parts(synth_images, synth_labels),
            "synthetic-texture": parts(tex_images, tex_labels)}
    train_sets = {k: v[0] for k, v in data.items()}
    test_sets = {k: v[1] for k, v in data.items()}
    tcfg = _train_cfg(cfg)
    return cross_evaluate(train_sets, test_sets, num_classes, tcfg, work_dir)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, ConfigError) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except (DataError, CheckpointError, FileNotFoundError, OSError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
