"""Image corpus ingestion and a procedural stand-in corpus."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusImage:
    name: str
    data: np.ndarray  # 3 x crop x crop, float32 in [0, 1]


def center_crop(array: np.ndarray, crop: int) -> np.ndarray:
    """Center crop an ``H x W x C`` array to ``crop x crop``."""
    h, w = array.shape[:2]
    top, left = (h - crop) // 2, (w - crop) // 2
    return array[top:top + crop, left:left + crop]


def load_corpus(path, crop: int) -> list[CorpusImage]:
    """Load every PNG under ``path`` (lexicographic order) as a centre crop in [0, 1].

    Images smaller than ``crop`` and files PIL cannot decode are skipped with a
    warning; an error is raised only when nothing usable remains.
    """
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    if crop <= 0:
        raise ValueError("crop must be positive")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".png")
    images = []
    for f in files:
        try:
            with Image.open(f) as im:
                rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except (OSError, ValueError) as exc:
            warnings.warn(f"skipping undecodable image {f.name}: {exc}", stacklevel=2)
            continue
        if rgb.shape[0] < crop or rgb.shape[1] < crop:
            warnings.warn(f"skipping {f.name}: {rgb.shape[1]}x{rgb.shape[0]} is smaller than crop {crop}",
                          stacklevel=2)
            continue
        chw = center_crop(rgb, crop).transpose(2, 0, 1).astype(np.float32) / 255.0
        images.append(CorpusImage(f.stem, np.ascontiguousarray(chw)))
    if not images:
        raise CorpusError(f"no usable PNG images of at least {crop}x{crop} in {root}")
    log.debug("loaded %d images from %s", len(images), root)
    return images


def save_png(array: np.ndarray, path) -> None:
    """Write a ``3 x H x W`` image in [0, 1] as an 8-bit RGB PNG."""
    hwc = np.clip(np.asarray(array).transpose(1, 2, 0), 0, 1)
    Image.fromarray(np.floor(hwc * 255 + 0.5).astype(np.uint8), "RGB").save(path)


def downscale(image: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downscale of ``... x H x W`` by an integer factor."""
    if factor == 1:
        return image
    *lead, h, w = image.shape
    if h % factor or w % factor:
        raise ValueError(f"extents {h}x{w} not divisible by {factor}")
    return image.reshape(*lead, h // factor, factor, w // factor, factor).mean(axis=(-3, -1))


def synth_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """A smooth procedural scene: colour gradient, soft blobs, a few hard-edged shapes and mild texture."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = rng.uniform(0.15, 0.85, 3)
    slope = rng.uniform(-0.4, 0.4, (3, 2))
    img = base[:, None, None] + slope[:, :1, None] * (xx - 0.5) + slope[:, 1:, None] * (yy - 0.5)
    for _ in range(rng.integers(2, 5)):
        cx, cy = rng.uniform(0, 1, 2)
        r = rng.uniform(0.1, 0.35)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r * r))
        img += rng.uniform(-0.4, 0.4, 3)[:, None, None] * blob
    for _ in range(rng.integers(1, 4)):
        colour = rng.uniform(0, 1, 3)[:, None, None]
        if rng.random() < 0.5:
            x0, y0 = rng.uniform(0, 0.7, 2)
            x1, y1 = x0 + rng.uniform(0.15, 0.4), y0 + rng.uniform(0.15, 0.4)
            mask = (xx >= x0) & (xx < x1) & (yy >= y0) & (yy < y1)
        else:
            cx, cy = rng.uniform(0.2, 0.8, 2)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < rng.uniform(0.05, 0.2) ** 2
        img = np.where(mask[None], 0.3 * img + 0.7 * colour, img)
    freq = rng.uniform(4, 12)
    angle = rng.uniform(0, np.pi)
    img += 0.04 * np.sin(2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy))[None]
    return np.clip(img, 0, 1).astype(np.float32)


def write_synthetic_corpus(path, count: int, size: int = 96, seed: int = 0) -> list[Path]:
    """Write ``count`` procedural PNGs named ``img_0000.png``... to ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        p = root / f"img_{i:04d}.png"
        save_png(synth_image(rng, size), p)
        out.append(p)
    return out
