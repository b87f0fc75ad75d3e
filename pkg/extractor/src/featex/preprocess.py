"""Image preprocessing: optional bottom crop, resize, center crop, standardize.

Pipeline per image: crop a configurable fraction off the bottom (gallery
images often carry a text strip there), resize the shorter side to 256,
take a centered 224x224 crop, scale to [0, 1], and standardize with the
ImageNet channel statistics.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

RESIZE_SHORTER = 256
CROP_SIZE = 224
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
DEFAULT_BOTTOM_CROP_FRACTION = 0.1


def crop_bottom(img: Image.Image, fraction: float) -> Image.Image:
    """Drop the bottom ``fraction`` of the image (text-strip removal)."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"crop fraction must be in [0, 1), got {fraction}")
    if fraction == 0.0:
        return img
    keep = max(1, int(round(img.height * (1.0 - fraction))))
    return img.crop((0, 0, img.width, keep))


def resize_shorter_side(img: Image.Image, target: int = RESIZE_SHORTER) -> Image.Image:
    w, h = img.size
    if w <= h:
        new_w, new_h = target, max(1, round(h * target / w))
    else:
        new_w, new_h = max(1, round(w * target / h)), target
    return img.resize((new_w, new_h), Image.BILINEAR)


def center_crop(img: Image.Image, size: int = CROP_SIZE) -> Image.Image:
    w, h = img.size
    if w < size or h < size:
        raise ValueError(f"image {w}x{h} smaller than crop size {size}")
    left = (w - size) // 2
    top = (h - size) // 2
    return img.crop((left, top, left + size, top + size))


def standardize(img: Image.Image) -> np.ndarray:
    """(3, H, W) float32 tensor, [0, 1]-scaled then ImageNet-standardized."""
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    arr = (arr - np.asarray(IMAGENET_MEAN, dtype=np.float32)) / np.asarray(
        IMAGENET_STD, dtype=np.float32
    )
    return arr.transpose(2, 0, 1)


def prepare_image(
    path, bottom_crop_fraction: float = 0.0
) -> np.ndarray:
    """Full pipeline from an image file to a (3, 224, 224) network input."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        img = crop_bottom(img, bottom_crop_fraction)
        img = resize_shorter_side(img)
        img = center_crop(img)
        return standardize(img)
