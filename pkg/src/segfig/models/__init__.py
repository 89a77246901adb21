from .sketch_vae import SketchVae
from .sketch_cvae import ConditionalSketchVae
from .portray import PatchDiscriminator, PortrayModel
from .segmenter import SegModel

__all__ = ["SketchVae", "ConditionalSketchVae", "PortrayModel",
           "PatchDiscriminator", "SegModel"]
