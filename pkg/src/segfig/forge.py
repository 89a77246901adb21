"""Procedural generator for paired figure data.

Each sample is an articulated 2-D stick figure rasterized three ways: a
semantic label map over the sketch palette, an RGB rendering with
per-segment base colors plus procedural texture, and a six-part body
silhouette sharing the same skeleton. This stands in for a photographic
dataset with fashion segmentation labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .palette import DEFAULT_PALETTE, ClassPalette

# Skeleton proportions in units of the figure scale.
TORSO_LEN = 1.00
NECK_LEN = 0.12
HEAD_R = 0.27
SHOULDER_HALF = 0.28
HIP_HALF = 0.16
UPPER_ARM = 0.42
LOWER_ARM = 0.38
THIGH = 0.55
SHIN = 0.52
TORSO_R = 0.26
ARM_R = 0.085
LEG_R = 0.11

# Silhouette part indices.
SIL_HEAD = 1
SIL_TORSO = 2
SIL_LARM = 3
SIL_RARM = 4
SIL_LLEG = 5
SIL_RLEG = 6


@dataclass(frozen=True)
class FigurePose:
    """Joint angles (radians), global placement and limb radii (pixels).

    Limb angles measure deviation from straight-down; for arms and legs
    positive values swing the limb outward, so equal left/right angles give
    a mirror-symmetric pose.
    """

    shoulder_l: float = 0.0
    shoulder_r: float = 0.0
    elbow_l: float = 0.0
    elbow_r: float = 0.0
    hip_l: float = 0.0
    hip_r: float = 0.0
    knee_l: float = 0.0
    knee_r: float = 0.0
    neck_tilt: float = 0.0
    scale: float = 18.0
    tx: float = 0.0
    ty: float = 0.0
    torso_r: float = TORSO_R
    arm_r: float = ARM_R
    leg_r: float = LEG_R
    head_r: float = HEAD_R


@dataclass(frozen=True)
class ForgeConfig:
    resolution: int = 64
    palette: ClassPalette = DEFAULT_PALETTE
    scale_frac: tuple = (0.20, 0.28)     # figure scale as fraction of height
    max_limb_swing: float = 1.2          # radians, shoulders and hips
    max_bend: float = 0.9                # radians, elbows and knees
    garment_overhang: float = 2.0        # pixels garments may extend past the body
    hat_prob: float = 0.5
    bag_prob: float = 0.5
    noise_sigma: float = 0.025

    def __post_init__(self):
        if self.resolution < 32:
            raise ValueError("resolution must be >= 32")
        if len(self.palette) < 5:
            raise ValueError("palette needs at least 5 classes")

    @property
    def overhang_margin(self) -> float:
        """Max distance any labeled pixel may lie outside the silhouette."""
        return self.garment_overhang + 3.0


class PoseError(ValueError):
    pass


def _grid(res):
    ys, xs = np.mgrid[0:res, 0:res]
    return xs.astype(np.float64), ys.astype(np.float64)


def _capsule(xs, ys, p0, p1, r):
    """Mask of points within distance r of segment p0-p1."""
    px, py = p1[0] - p0[0], p1[1] - p0[1]
    denom = px * px + py * py
    if denom == 0.0:
        return (xs - p0[0]) ** 2 + (ys - p0[1]) ** 2 <= r * r
    t = ((xs - p0[0]) * px + (ys - p0[1]) * py) / denom
    t = np.clip(t, 0.0, 1.0)
    dx = xs - (p0[0] + t * px)
    dy = ys - (p0[1] + t * py)
    return dx * dx + dy * dy <= r * r


def _disk(xs, ys, c, r):
    return (xs - c[0]) ** 2 + (ys - c[1]) ** 2 <= r * r


def _ellipse(xs, ys, c, rx, ry):
    return ((xs - c[0]) / rx) ** 2 + ((ys - c[1]) / ry) ** 2 <= 1.0


def _limb_dir(angle, side):
    """Unit direction for a limb segment; side +1 is right (+x), -1 left."""
    return (side * math.sin(angle), math.cos(angle))


def skeleton_points(pose: FigurePose, res: int) -> dict:
    """Joint positions in pixel coordinates (x right, y down)."""
    s = pose.scale
    cx = (res - 1) / 2.0 + pose.tx
    # Place the neck so the default figure is vertically centered.
    total = s * (2 * pose.head_r + NECK_LEN + TORSO_LEN + THIGH + SHIN)
    top = (res - total) / 2.0 + pose.ty
    head_c = (cx + s * NECK_LEN * math.sin(pose.neck_tilt),
              top + s * pose.head_r)
    neck = (cx, top + s * (2 * pose.head_r + NECK_LEN))
    pelvis = (neck[0], neck[1] + s * TORSO_LEN)
    pts = {"head_c": head_c, "neck": neck, "pelvis": pelvis}
    for side, tag in ((-1, "l"), (1, "r")):
        sh = (neck[0] + side * s * SHOULDER_HALF, neck[1] + s * 0.06)
        d1 = _limb_dir(getattr(pose, f"shoulder_{tag}"), side)
        el = (sh[0] + s * UPPER_ARM * d1[0], sh[1] + s * UPPER_ARM * d1[1])
        d2 = _limb_dir(getattr(pose, f"shoulder_{tag}") +
                       getattr(pose, f"elbow_{tag}"), side)
        wr = (el[0] + s * LOWER_ARM * d2[0], el[1] + s * LOWER_ARM * d2[1])
        hp = (pelvis[0] + side * s * HIP_HALF, pelvis[1])
        d3 = _limb_dir(getattr(pose, f"hip_{tag}"), side)
        kn = (hp[0] + s * THIGH * d3[0], hp[1] + s * THIGH * d3[1])
        # Knees only bend backward/inward relative to the thigh.
        d4 = _limb_dir(getattr(pose, f"hip_{tag}") -
                       getattr(pose, f"knee_{tag}"), side)
        an = (kn[0] + s * SHIN * d4[0], kn[1] + s * SHIN * d4[1])
        pts[f"shoulder_{tag}"] = sh
        pts[f"elbow_{tag}"] = el
        pts[f"wrist_{tag}"] = wr
        pts[f"hip_{tag}"] = hp
        pts[f"knee_{tag}"] = kn
        pts[f"ankle_{tag}"] = an
    return pts


def _validate_pose(pose: FigurePose, cfg: ForgeConfig):
    if min(pose.torso_r, pose.arm_r, pose.leg_r, pose.head_r) <= 0:
        raise PoseError("limb widths must be positive")
    if pose.scale <= 0:
        raise PoseError("scale must be positive")
    lim = cfg.max_limb_swing + 1e-9
    for name in ("shoulder_l", "shoulder_r", "hip_l", "hip_r"):
        if abs(getattr(pose, name)) > lim:
            raise PoseError(f"{name} outside articulation limits")
    for name in ("elbow_l", "elbow_r", "knee_l", "knee_r"):
        if abs(getattr(pose, name)) > cfg.max_bend + 1e-9:
            raise PoseError(f"{name} outside articulation limits")
    pts = skeleton_points(pose, cfg.resolution)
    s = pose.scale
    over = cfg.garment_overhang
    # Clearance needed around each joint, including garments and accessories.
    margins = {
        "head_c": s * pose.head_r * 1.4,          # hat brim above the head
        "neck": s * pose.torso_r + over,
        "pelvis": s * 0.26 + over + 1,            # skirt hem
    }
    for tag in ("l", "r"):
        for j in ("shoulder", "elbow"):
            margins[f"{j}_{tag}"] = s * pose.arm_r + over
        margins[f"wrist_{tag}"] = s * 0.27 + 1     # hanging bag
        margins[f"hip_{tag}"] = s * pose.leg_r + over
        margins[f"knee_{tag}"] = s * pose.leg_r + over
        margins[f"ankle_{tag}"] = s * pose.leg_r + over + 1.5
    hi = cfg.resolution - 1
    for name, (px, py) in pts.items():
        r = margins[name]
        if px - r < 0 or px + r > hi or py - r < 0 or py + r > hi:
            raise PoseError("figure does not fit the canvas")
    return pts


def render_part_silhouette(pose: FigurePose, cfg: ForgeConfig) -> np.ndarray:
    """Rasterize the six-part body silhouette for a pose.

    Parts are drawn torso first, then limbs, then head, so later parts
    occlude earlier ones.
    """
    pts = _validate_pose(pose, cfg)
    s = pose.scale
    xs, ys = _grid(cfg.resolution)
    sil = np.zeros((cfg.resolution, cfg.resolution), dtype=np.uint8)
    sil[_capsule(xs, ys, pts["neck"], pts["pelvis"], s * pose.torso_r)] = SIL_TORSO
    for tag, idx in (("l", SIL_LLEG), ("r", SIL_RLEG)):
        leg = (_capsule(xs, ys, pts[f"hip_{tag}"], pts[f"knee_{tag}"], s * pose.leg_r)
               | _capsule(xs, ys, pts[f"knee_{tag}"], pts[f"ankle_{tag}"], s * pose.leg_r))
        sil[leg] = idx
    for tag, idx in (("l", SIL_LARM), ("r", SIL_RARM)):
        arm = (_capsule(xs, ys, pts[f"shoulder_{tag}"], pts[f"elbow_{tag}"], s * pose.arm_r)
               | _capsule(xs, ys, pts[f"elbow_{tag}"], pts[f"wrist_{tag}"], s * pose.arm_r))
        sil[arm] = idx
    head = (_disk(xs, ys, pts["head_c"], s * pose.head_r)
            | _capsule(xs, ys, pts["head_c"], pts["neck"], s * 0.08))
    sil[head] = SIL_HEAD
    return sil


def sample_pose(rng: np.random.Generator, cfg: ForgeConfig) -> FigurePose:
    """Draw a random pose that fits the canvas (deterministic rejection)."""
    res = cfg.resolution
    for _ in range(200):
        sw = cfg.max_limb_swing
        pose = FigurePose(
            shoulder_l=rng.uniform(-0.15, sw),
            shoulder_r=rng.uniform(-0.15, sw),
            elbow_l=rng.uniform(-0.2, cfg.max_bend),
            elbow_r=rng.uniform(-0.2, cfg.max_bend),
            hip_l=rng.uniform(-0.05, sw * 0.35),
            hip_r=rng.uniform(-0.05, sw * 0.35),
            knee_l=rng.uniform(0.0, cfg.max_bend * 0.5),
            knee_r=rng.uniform(0.0, cfg.max_bend * 0.5),
            neck_tilt=rng.uniform(-0.2, 0.2),
            scale=rng.uniform(*cfg.scale_frac) * res,
            tx=rng.uniform(-0.09, 0.09) * res,
            ty=rng.uniform(-0.05, 0.05) * res,
        )
        try:
            _validate_pose(pose, cfg)
            return pose
        except PoseError:
            continue
    raise PoseError("no valid pose fits this config")


def _sample_style(rng: np.random.Generator, cfg: ForgeConfig) -> dict:
    def hue():
        c = rng.uniform(0.08, 0.95, size=3)
        c[rng.integers(0, 3)] = rng.uniform(0.55, 0.95)
        return c
    skin = np.array([0.87, 0.68, 0.54]) * rng.uniform(0.55, 1.05)
    return {
        "skin": np.clip(skin, 0, 1),
        "hair": rng.uniform(0.05, 0.45, size=3),
        "top": hue(),
        "top2": hue(),
        "bottom": hue(),
        "shoe": rng.uniform(0.05, 0.5, size=3),
        "hat": hue(),
        "bag": hue(),
        "striped_top": rng.random() < 0.5,
        "skirt": rng.random() < 0.5,
        "long_sleeves": rng.random() < 0.5,
        "has_hat": rng.random() < cfg.hat_prob,
        "has_bag": rng.random() < cfg.bag_prob,
        "bag_side": "l" if rng.random() < 0.5 else "r",
    }


def render_label_map(pose: FigurePose, style: dict, cfg: ForgeConfig) -> np.ndarray:
    """Rasterize the clothed sketch over the class palette."""
    pts = _validate_pose(pose, cfg)
    s = pose.scale
    res = cfg.resolution
    pal = cfg.palette
    xs, ys = _grid(res)
    over = cfg.garment_overhang
    m = np.zeros((res, res), dtype=np.uint8)

    body = _capsule(xs, ys, pts["neck"], pts["pelvis"], s * pose.torso_r)
    for tag in ("l", "r"):
        body |= _capsule(xs, ys, pts[f"shoulder_{tag}"], pts[f"elbow_{tag}"], s * pose.arm_r)
        body |= _capsule(xs, ys, pts[f"elbow_{tag}"], pts[f"wrist_{tag}"], s * pose.arm_r)
        body |= _capsule(xs, ys, pts[f"hip_{tag}"], pts[f"knee_{tag}"], s * pose.leg_r)
        body |= _capsule(xs, ys, pts[f"knee_{tag}"], pts[f"ankle_{tag}"], s * pose.leg_r)
    body |= _disk(xs, ys, pts["head_c"], s * pose.head_r)
    body |= _capsule(xs, ys, pts["head_c"], pts["neck"], s * 0.08)
    m[body] = pal.index("skin")

    # Bottom garment: skirt or trousers.
    if style["skirt"]:
        waist = (pts["pelvis"][0], pts["pelvis"][1] - s * 0.12)
        hem = (pts["pelvis"][0], pts["pelvis"][1] + s * 0.42)
        bottom = _capsule(xs, ys, waist, hem, s * 0.26 + over)
    else:
        bottom = np.zeros_like(body)
        for tag in ("l", "r"):
            hip, knee, ankle = pts[f"hip_{tag}"], pts[f"knee_{tag}"], pts[f"ankle_{tag}"]
            cuff = (knee[0] + (ankle[0] - knee[0]) * 0.8,
                    knee[1] + (ankle[1] - knee[1]) * 0.8)
            bottom |= _capsule(xs, ys, hip, knee, s * pose.leg_r + over * 0.7)
            bottom |= _capsule(xs, ys, knee, cuff, s * pose.leg_r + over * 0.7)
    m[bottom] = pal.index("bottom")

    # Top garment over the torso, with sleeves.
    waist = (pts["pelvis"][0], pts["pelvis"][1] - s * 0.22)
    top = _capsule(xs, ys, pts["neck"], waist, s * pose.torso_r + over)
    for tag in ("l", "r"):
        sh, el, wr = pts[f"shoulder_{tag}"], pts[f"elbow_{tag}"], pts[f"wrist_{tag}"]
        top |= _capsule(xs, ys, sh, el, s * pose.arm_r + over * 0.7)
        if style["long_sleeves"]:
            top |= _capsule(xs, ys, el, wr, s * pose.arm_r + over * 0.7)
    m[top] = pal.index("top")

    # Head: hair ring around a face ellipse.
    hr = s * pose.head_r
    hair = _disk(xs, ys, pts["head_c"], hr)
    m[hair] = pal.index("hair")
    face_c = (pts["head_c"][0], pts["head_c"][1] + 0.12 * hr)
    face = _ellipse(xs, ys, face_c, 0.62 * hr, 0.70 * hr)
    m[face] = pal.index("face")

    for tag, name in (("l", "left_shoe"), ("r", "right_shoe")):
        m[_disk(xs, ys, pts[f"ankle_{tag}"], s * pose.leg_r + 1.2)] = pal.index(name)

    if style["has_hat"]:
        hat_c = (pts["head_c"][0], pts["head_c"][1] - 0.85 * hr)
        m[_ellipse(xs, ys, hat_c, 1.05 * hr, 0.45 * hr)] = pal.index("hat")
    if style["has_bag"]:
        wrist = pts[f"wrist_{style['bag_side']}"]
        bag_c = (wrist[0], wrist[1] + s * 0.12)
        m[_disk(xs, ys, bag_c, s * 0.14)] = pal.index("bag")
    return m


def _plain_background(res: int, rng: np.random.Generator) -> np.ndarray:
    base = rng.uniform(0.72, 0.88)
    grad = np.linspace(-0.05, 0.05, res)[:, None]
    img = np.full((res, res, 3), base) + grad[..., None]
    img += rng.normal(0.0, 0.01, size=(res, res, 3))
    return np.clip(img, 0.0, 1.0)


def render_rgb(labels: np.ndarray, style: dict, cfg: ForgeConfig,
               rng: np.random.Generator) -> np.ndarray:
    """Texture a label map with the sample's base colors plus noise/stripes."""
    res = labels.shape[0]
    pal = cfg.palette
    img = _plain_background(res, rng)
    per_class = {
        "skin": style["skin"], "face": np.clip(style["skin"] * 1.12, 0, 1),
        "hair": style["hair"], "top": style["top"], "bottom": style["bottom"],
        "left_shoe": style["shoe"], "right_shoe": style["shoe"],
        "hat": style["hat"], "bag": style["bag"],
    }
    ys = np.arange(res)[:, None]
    stripe = ((ys // 3) % 2).astype(bool) & np.ones((res, res), dtype=bool)
    for name, color in per_class.items():
        region = labels == pal.index(name)
        img[region] = color
        if name == "top" and style["striped_top"]:
            img[region & stripe] = style["top2"]
    img += rng.normal(0.0, cfg.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float64)


def background_texture(res: int, seed: int, style: int = 0) -> np.ndarray:
    """Seeded procedural texture in one of three styles.

    Style 0: smooth value-noise blobs; style 1: diagonal stripes;
    style 2: soft checkerboard. Distinct styles give the synthetic data
    sources a controlled background domain gap.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, style]))
    style = style % 3

    def garment_hue():
        c = rng.uniform(0.08, 0.95, size=3)
        c[rng.integers(0, 3)] = rng.uniform(0.55, 0.95)
        return c

    def skin_tone():
        return np.clip(np.array([0.87, 0.68, 0.54])
                       * rng.uniform(0.55, 1.05), 0, 1)

    if style == 0:
        # smooth blobs drift through skin tones and garment hues, so only
        # a segmenter trained on this style learns to call them background
        picks = [skin_tone() if rng.random() < 0.5 else garment_hue()
                 for _ in range(25)]
        coarse = np.array(picks).reshape(5, 5, 3)
        idx = np.linspace(0, 4, res)
        i0 = np.floor(idx).astype(int).clip(0, 3)
        f = (idx - i0)[:, None]
        rows = coarse[i0] * (1 - f[..., None]) + coarse[i0 + 1] * f[..., None]
        fc = (idx - i0)[None, :, None]
        tex = rows[:, i0] * (1 - fc) + rows[:, i0 + 1] * fc
    elif style == 1:
        # narrow stripes in garment hues, echoing striped tops
        c0 = garment_hue()
        c1 = garment_hue()
        xs, ys = _grid(res)
        period = rng.integers(4, 9)
        band = (((xs + ys) // period) % 2).astype(bool)
        tex = np.where(band[..., None], c0, c1)
    else:
        # checkerboard of skin tone against a garment hue
        c0 = skin_tone()
        c1 = garment_hue()
        xs, ys = _grid(res)
        period = rng.integers(6, 12)
        checker = (((xs // period) + (ys // period)) % 2).astype(bool)
        tex = np.where(checker[..., None], c0, c1)
        tex = tex + rng.normal(0, 0.02, size=tex.shape)
    return np.clip(tex, 0.0, 1.0)


def composite_background(img: np.ndarray, labels: np.ndarray, seed: int,
                         style: int = 0) -> np.ndarray:
    """Replace background-class pixels with a seeded procedural texture."""
    if img.shape[:2] != labels.shape:
        raise ValueError("image and label dimensions differ")
    out = img.copy()
    bg = labels == 0
    if not bg.any():
        return out
    tex = background_texture(labels.shape[0], seed, style)
    out[bg] = tex[bg]
    return out


def generate_sample(seed: int, cfg: ForgeConfig):
    """Forge one paired sample: (label map, RGB image, silhouette, pose).

    Deterministic for a fixed (seed, cfg); the label map and silhouette
    share one skeleton.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x5E6F16, seed]))
    pose = sample_pose(rng, cfg)
    style = _sample_style(rng, cfg)
    labels = render_label_map(pose, style, cfg)
    sil = render_part_silhouette(pose, cfg)
    rgb = render_rgb(labels, style, cfg, rng)
    return labels, rgb, sil, pose
