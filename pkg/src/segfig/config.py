"""Run configuration: YAML document plus flag overrides, with validation
and a stable content hash embedded into produced artifacts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # Data
    resolution: int = 64
    count: int = 2000
    seed: int = 0
    # Model
    latent_dim: int = 64
    cond_dim: int = 64
    kl_weight: float = 6.55
    kl_weight_scaled: bool = True   # divide by pixel count in the training loss
    input_mode: str = "color-map"
    color_conditioned: bool = False
    use_skips: bool = True
    # Training
    epochs: int = 50
    batch_size: int = 32
    lr: float = 2.0e-4
    betas: tuple = (0.5, 0.999)
    val_frac: float = 0.1
    l1_weight: float = 100.0
    adv_weight: float = 0.0
    target_accuracy: float | None = None
    target_l1: float | None = None
    patience: int | None = None
    deterministic: bool = True
    # Sampling / analysis
    n_samples: int = 4
    walk_steps: int = 10
    walk_component: int = 0
    walk_extent: float = 1.0

    def __post_init__(self):
        if self.resolution < 32:
            raise ConfigError("resolution must be >= 32")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.kl_weight <= 0:
            raise ConfigError("kl_weight must be positive")
        if self.input_mode not in ("color-map", "probability-map"):
            raise ConfigError(f"unknown input_mode {self.input_mode!r}")
        if not 0.0 < self.val_frac < 1.0:
            raise ConfigError("val_frac must be in (0, 1)")
        if isinstance(self.betas, list):
            self.betas = tuple(self.betas)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Read a YAML config file and apply flag overrides (flags win).
        Unknown keys are rejected."""
        data = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: config must be a key-value document")
            data.update(loaded)
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def effective_kl_weight(self) -> float:
        if self.kl_weight_scaled:
            return self.kl_weight / float(self.resolution ** 2)
        return self.kl_weight

    def write_provenance(self, out_dir) -> None:
        """Record the fully resolved config next to produced artifacts."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"config": self.to_dict(), "config_hash": self.config_hash}
        with open(out / "run.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
