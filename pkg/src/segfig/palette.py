"""Class palettes for figure sketches and body-part silhouettes."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ClassPalette:
    """Ordered class labels with one display color per class.

    Index 0 is always background. Colors are 8-bit RGB triples, used to
    render label maps as color images and to build indexed PNG palettes.
    """

    names: tuple = ()
    colors: tuple = ()

    def __post_init__(self):
        if len(self.names) != len(self.colors):
            raise ValueError("names and colors must have equal length")
        if len(self.names) < 1 or self.names[0] != "background":
            raise ValueError("index 0 must be 'background'")
        if len(set(self.colors)) != len(self.colors):
            raise ValueError("palette colors must be distinct")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


DEFAULT_PALETTE = ClassPalette(
    names=(
        "background",
        "skin",
        "hair",
        "face",
        "top",
        "bottom",
        "left_shoe",
        "right_shoe",
        "hat",
        "bag",
    ),
    colors=(
        (0, 0, 0),
        (224, 172, 138),
        (94, 60, 32),
        (250, 212, 180),
        (196, 32, 64),
        (40, 80, 180),
        (32, 160, 64),
        (160, 200, 40),
        (230, 180, 30),
        (150, 60, 170),
    ),
)

# Six-part body silhouette used as the conditioning image: background plus
# head, torso, left/right arms, left/right legs.
SILHOUETTE_NAMES = (
    "background",
    "head",
    "torso",
    "left_arm",
    "right_arm",
    "left_leg",
    "right_leg",
)

SILHOUETTE_COLORS = (
    (0, 0, 0),
    (255, 220, 80),
    (200, 60, 60),
    (70, 140, 255),
    (70, 220, 220),
    (140, 220, 70),
    (220, 130, 220),
)

N_SILHOUETTE_PARTS = len(SILHOUETTE_NAMES)
