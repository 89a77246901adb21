from .losses import (categorical_nll, gan_losses, kl_standard_normal,
                     reparameterize, softmax_over_channels)
from .blocks import init_weights, lrelu_slope, make_optimizer
from .checkpoint import (CheckpointError, load_checkpoint, save_checkpoint)

__all__ = [
    "categorical_nll", "gan_losses", "kl_standard_normal", "reparameterize",
    "softmax_over_channels", "init_weights", "lrelu_slope", "make_optimizer",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
]
