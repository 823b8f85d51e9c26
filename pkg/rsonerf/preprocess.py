"""
Chroma-key background removal: pixels whose hue lies within a tolerance of the key hue (and which are
saturated and bright enough) become transparent.
"""
import colorsys
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import uniform_filter
from skimage.color import rgb2hsv

from .exceptions import ContractError
from .settings import CHROMA_KEY


__all__ = (
    "ChromaKeyConfig",
    "rgb_to_hsv",
    "hue_distance",
    "key_mask",
    "chroma_key",
    "composite_over",
    "chroma_key_directory",
)

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png",)


@dataclass(frozen=True)
class ChromaKeyConfig:
    key_hue: float = 120.0
    hue_tolerance: float = 35.0
    min_saturation: float = 0.25
    min_value: float = 0.15
    despill_strength: float = 0.5
    feather_radius: int = 1

    def __post_init__(self):
        problems = []
        if not 0 <= self.key_hue < 360:
            problems.append("key_hue must lie in [0, 360)")
        if not self.hue_tolerance > 0:
            problems.append("hue_tolerance must be positive")
        for name in ("min_saturation", "min_value", "despill_strength"):
            if not 0 <= getattr(self, name) <= 1:
                problems.append("%s must lie in [0, 1]" % name)
        if self.feather_radius < 0 or int(self.feather_radius) != self.feather_radius:
            problems.append("feather_radius must be a non-negative integer")
        if problems:
            raise ContractError("; ".join(problems))

    @classmethod
    def default(cls, **overrides):
        options = dict(CHROMA_KEY)
        options.update(overrides)
        return cls(**options)

    @property
    def spill_channel(self):
        """
        RGB channel closest to the key hue (0 = red, 1 = green, 2 = blue).
        """
        return int(round(self.key_hue / 120.0)) % 3

    def as_dict(self):
        return asdict(self)


def rgb_to_hsv(rgb):
    """
    Hexcone conversion of one colour in [0, 1]^3; returns ``(hue in degrees, saturation, value)``.
    Hue is 0 for achromatic colours.
    """
    r, g, b = (float(c) for c in rgb)
    h, s, v = colorsys.rgb_to_hsv(r, g, b)
    return h * 360.0, s, v


def hue_distance(hue, key_hue):
    """
    Circular distance in degrees.
    """
    return np.abs((np.asarray(hue) - key_hue + 180.0) % 360.0 - 180.0)


def _as_float_rgb(image):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[-1] not in (3, 4):
        raise ContractError("Expected an HxWx3 image, got shape %s" % (image.shape,))
    rgb = image[..., :3]
    if image.dtype == np.uint8:
        return rgb.astype(np.float64) / 255.0
    return np.clip(rgb.astype(np.float64), 0.0, 1.0)


def key_mask(image, cfg: ChromaKeyConfig):
    """
    Boolean mask of key-coloured (background) pixels, before feathering.
    """
    hsv = rgb2hsv(_as_float_rgb(image))
    hue, saturation, value = hsv[..., 0] * 360.0, hsv[..., 1], hsv[..., 2]
    return (hue_distance(hue, cfg.key_hue) <= cfg.hue_tolerance) & (saturation >= cfg.min_saturation) & (
        value >= cfg.min_value
    )


def chroma_key(image, cfg: ChromaKeyConfig = None):
    """
    Returns a uint8 RGBA image: keyed pixels get alpha 0, the rest 255; alpha is then box-blurred over
    ``feather_radius`` and the key channel of foreground pixels is pulled toward the mean of the other two.
    """
    cfg = cfg or ChromaKeyConfig.default()
    rgb = _as_float_rgb(image)
    alpha = np.where(key_mask(rgb, cfg), 0.0, 255.0)
    if cfg.feather_radius:
        alpha = uniform_filter(alpha, size=2 * cfg.feather_radius + 1, mode="nearest")
    alpha = np.clip(np.round(alpha), 0, 255).astype(np.uint8)

    if cfg.despill_strength:
        channel = cfg.spill_channel
        others = [c for c in range(3) if c != channel]
        spill = rgb[..., channel]
        neutral = rgb[..., others].mean(axis=-1)
        excess = np.maximum(spill - neutral, 0.0) * (alpha > 0)
        rgb = rgb.copy()
        rgb[..., channel] = spill - cfg.despill_strength * excess

    out = np.empty(rgb.shape[:2] + (4,), dtype=np.uint8)
    out[..., :3] = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    out[..., 3] = alpha
    return out


def composite_over(image, background):
    """
    ``alpha * foreground + (1 - alpha) * background`` as float RGB in [0, 1].
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[-1] != 4:
        raise ContractError("composite_over expects an HxWx4 image, got shape %s" % (image.shape,))
    data = image.astype(np.float64) / 255.0 if image.dtype == np.uint8 else image.astype(np.float64)
    alpha = data[..., 3:]
    return data[..., :3] * alpha + np.asarray(background, dtype=np.float64) * (1.0 - alpha)


def chroma_key_directory(in_dir, out_dir, cfg: ChromaKeyConfig = None):
    """
    Keys every PNG in ``in_dir`` into an RGBA PNG of the same name in ``out_dir``. Returns the written paths.
    """
    cfg = cfg or ChromaKeyConfig.default()
    names = sorted(name for name in os.listdir(in_dir) if name.lower().endswith(IMAGE_EXTENSIONS))
    if not names:
        logger.warning("No PNG images found in %s", in_dir)
        return []
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in names:
        with Image.open(os.path.join(in_dir, name)) as source:
            rgb = np.asarray(source.convert("RGB"))
        target = os.path.join(out_dir, name)
        Image.fromarray(chroma_key(rgb, cfg)).save(target)
        written.append(target)
    logger.info("Keyed %d images from %s into %s", len(written), in_dir, out_dir)
    return written
