"""Training-pair generation and model preparation for experiments."""

from __future__ import annotations

import logging

import numpy as np

from .. import codec, sr
from .. import numkit as nk
from ..cipher import KeySeed
from ..codec import CodecModel, RateConfig
from ..modem import ChannelConfig
from ..sr import RdnConfig, RdnModel
from .corpus import CorpusImage, downscale
from .pipeline import Models, run_pipeline
from .sweep import point_seeds

log = logging.getLogger(__name__)


def _arrays(images) -> list[np.ndarray]:
    return [img.data if isinstance(img, CorpusImage) else np.asarray(img, dtype=np.float32) for img in images]


def train_codec_model(images, eta: float, crop: int, config: nk.TrainConfig, seed: int = 0,
                      bit_error_rate: float | None = None, callback=None) -> tuple[CodecModel, codec.TrainResult]:
    model = CodecModel(RateConfig(eta, crop, crop), seed=seed)
    result = codec.train_codec(model, _arrays(images), config, bit_error_rate=bit_error_rate, callback=callback)
    return model, result


def make_sr_pairs(images, sr_codec: CodecModel, scale: int, snr_db: float = 10.0, scheme="qpsk",
                  key_seed: KeySeed | None = None, seed: int = 0, repeats: int = 1) -> list[tuple[np.ndarray, np.ndarray]]:
    """Degraded/ground-truth pairs from the frozen encrypted transmission chain.

    Each image is sent ``repeats`` times per scheme (``scheme`` may be a name or
    a list of names) through encode -> encrypt -> modem at ``snr_db`` ->
    decrypt -> decode at ``crop / scale``; the pair target is the
    full-resolution crop. Pairs are ordered scheme-major.
    """
    schemes = [scheme] if isinstance(scheme, str) else list(scheme)
    if not schemes:
        raise ValueError("no training schemes given")
    key_seed = key_seed or KeySeed.from_int(seed)
    stand_in = Models(sr_codec)
    arrays = _arrays(images)
    for img in arrays:
        if downscale(img, scale).shape[-2:] != (sr_codec.rate.height, sr_codec.rate.width):
            raise ValueError("sr codec resolution does not match crop / scale")
    pairs = []
    for name in schemes:
        for i, img in enumerate(arrays):
            for rep in range(repeats):
                seeds = point_seeds(seed, "sr-train", name, 0, 0, i, rep)
                rec = run_pipeline(downscale(img, scale), "encrypted", name,
                                   ChannelConfig(snr_db, noise_seed=seeds.noise_seed), stand_in, key_seed,
                                   seeds.stream_index)
                pairs.append((rec.reconstruction, img))
    return pairs


def train_sr_model(pairs, scale: int, config: nk.TrainConfig, seed: int = 0, rdn: RdnConfig | None = None,
                   callback=None) -> tuple[RdnModel, codec.TrainResult]:
    cfg = rdn or RdnConfig(scale=scale)
    if cfg.scale != scale:
        raise ValueError("RdnConfig scale disagrees with the requested scale")
    model = RdnModel(cfg, seed=seed)
    result = sr.train_sr(model, pairs, config, callback=callback)
    return model, result
