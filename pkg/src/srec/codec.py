"""Convolutional JSCC autoencoder with a byte-valued latent.

The encoder is four stride-2 3x3 convolutions ending in ``tanh``; its
``C_lat x H/16 x W/16`` output is flattened channel-major and truncated to
``latent_byte_count`` values. The decoder zero-fills the truncated slots and
mirrors the encoder with pixel-shuffle upsampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .modem import theoretical_ber
from .numkit import Tensor


@dataclass(frozen=True)
class RateConfig:
    eta: float = 0.2
    height: int = 64
    width: int = 64

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.height % 16 or self.width % 16 or self.height <= 0 or self.width <= 0:
            raise ValueError(f"image extents must be positive multiples of 16, got {self.height}x{self.width}")

    @property
    def latent_byte_count(self) -> int:
        # rounding guards against float noise turning an exact integer into n + 1
        return max(1, math.ceil(round(self.eta * 3 * self.height * self.width / 4, 9)))

    @property
    def grid(self) -> tuple[int, int]:
        return self.height // 16, self.width // 16

    @property
    def latent_channels(self) -> int:
        gh, gw = self.grid
        return -(-self.latent_byte_count // (gh * gw))


def quantize(latent) -> np.ndarray:
    """Map values in [-1, 1] to bytes: ``round((v + 1) / 2 * 255)``, halves rounded up."""
    v = np.clip(np.asarray(latent.data if isinstance(latent, Tensor) else latent, dtype=np.float64), -1, 1)
    return np.floor((v + 1) / 2 * 255 + 0.5).astype(np.uint8)


def dequantize(data: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(data, dtype=np.float64) / 255 - 1


def flip_bits(data: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Independently flip each bit of ``data`` with probability ``rate``."""
    if rate <= 0:
        return np.asarray(data, dtype=np.uint8).copy()
    mask = np.packbits(rng.random(data.shape + (8,)) < rate, axis=-1)[..., 0]
    return np.bitwise_xor(data, mask)


class CodecModel(nk.Module):
    def __init__(self, rate: RateConfig = RateConfig(), widths=(32, 64, 64), seed: int = 0):
        self.rate = rate
        self.widths = tuple(widths)
        self.seed = seed
        rng = np.random.default_rng(seed)
        c1, c2, c3 = self.widths
        c_lat = rate.latent_channels
        enc_channels = [3, c1, c2, c3, c_lat]
        self.encoder = [nk.Conv2d(a, b, 3, stride=2, rng=rng) for a, b in zip(enc_channels, enc_channels[1:])]
        dec_channels = [c_lat, c3, c2, c1, 3]
        self.decoder = [nk.Conv2d(a, 4 * b, 3, rng=rng) for a, b in zip(dec_channels, dec_channels[1:])]
        self.refine = [nk.Conv2d(c, c, 3, rng=rng) for c in dec_channels[1:-1]]

    def _check_image(self, x: np.ndarray) -> None:
        if x.shape[-3:] != (3, self.rate.height, self.rate.width):
            raise ValueError(f"image shape {x.shape[-3:]} does not match rate config "
                             f"3x{self.rate.height}x{self.rate.width}")

    def encode_tensor(self, images: Tensor) -> Tensor:
        self._check_image(images.data)
        h = images
        for i, conv in enumerate(self.encoder):
            h = conv(h)
            h = nk.relu(h) if i < len(self.encoder) - 1 else nk.tanh(h)
        lead = h.shape[:-3]
        flat = nk.reshape(h, lead + (-1,))
        return nk.truncate_last(flat, self.rate.latent_byte_count)

    def decode_tensor(self, latent: Tensor) -> Tensor:
        n = self.rate.latent_byte_count
        if latent.shape[-1] != n:
            raise ValueError(f"latent has {latent.shape[-1]} values, rate config needs {n}")
        gh, gw = self.rate.grid
        c_lat = self.rate.latent_channels
        h = nk.pad_last(latent, c_lat * gh * gw)
        h = nk.reshape(h, latent.shape[:-1] + (c_lat, gh, gw))
        last = len(self.decoder) - 1
        for i, conv in enumerate(self.decoder):
            h = nk.pixel_shuffle(conv(h), 2)
            if i < last:
                h = nk.relu(self.refine[i](nk.relu(h)))
        return h

    def meta(self) -> dict:
        return {"kind": "codec", "eta": self.rate.eta, "height": self.rate.height,
                "width": self.rate.width, "widths": list(self.widths), "seed": self.seed}


def encode(model: CodecModel, image) -> Tensor:
    """Continuous latent in (-1, 1) with ``latent_byte_count`` entries."""
    x = image if isinstance(image, Tensor) else Tensor(image)
    return model.encode_tensor(x)


def decode(model: CodecModel, data: np.ndarray) -> np.ndarray:
    """Reconstruct a ``3 x H x W`` image in [0, 1] from latent bytes."""
    data = np.asarray(data, dtype=np.uint8)
    if data.shape[-1] != model.rate.latent_byte_count:
        raise ValueError(f"got {data.shape[-1]} latent bytes, expected {model.rate.latent_byte_count}")
    with nk.no_grad():
        out = model.decode_tensor(Tensor(dequantize(data), dtype=nk.default_dtype()))
    return np.clip(out.data, 0.0, 1.0)


def reconstruct(model: CodecModel, image) -> np.ndarray:
    """Noiseless encode -> quantize -> decode."""
    return decode(model, quantize(encode(model, image)))


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    initial_eval: float | None = None
    final_eval: float | None = None


def _stack(corpus) -> np.ndarray:
    arr = np.stack([np.asarray(getattr(x, "data", x)) for x in corpus]) if isinstance(corpus, (list, tuple)) \
        else np.asarray(corpus)
    if arr.ndim == 3:
        arr = arr[None]
    if len(arr) == 0:
        raise ValueError("empty corpus")
    return arr.astype(nk.default_dtype())


def iterate_batches(n: int, config: nk.TrainConfig, rng: np.random.Generator):
    """Yield index batches epoch by epoch (or until ``max_steps``)."""
    steps = config.max_steps if config.max_steps is not None else None
    done = 0
    epoch = 0
    while (steps is None and epoch < config.epochs) or (steps is not None and done < steps):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            if steps is not None and done >= steps:
                return
            yield order[start:start + config.batch_size]
            done += 1
        epoch += 1


def training_bit_error_rate(snr_db: float = 10.0, scheme: str = "qpsk") -> float:
    return theoretical_ber(scheme, snr_db)


def heldout_mse(model: CodecModel, images: np.ndarray, chunk: int = 16) -> float:
    total = 0.0
    with nk.no_grad():
        for start in range(0, len(images), chunk):
            part = images[start:start + chunk]
            recon = decode(model, quantize(encode(model, Tensor(part, dtype=nk.default_dtype()))))
            total += float(np.sum((recon - part) ** 2))
    return total / images.size


def train_codec(model: CodecModel, corpus, config: nk.TrainConfig = nk.TrainConfig(),
                holdout=None, bit_error_rate: float | None = None,
                callback=None) -> TrainResult:
    """Train end to end on MSE with straight-through quantization.

    Latent bytes are corrupted by independent bit flips at ``bit_error_rate``
    (default: QPSK BER at 10 dB Es/N0) so the decoder sees channel-like damage.
    """
    images = _stack(corpus)
    model._check_image(images)
    holdout_arr = _stack(holdout) if holdout is not None else images
    rate = training_bit_error_rate() if bit_error_rate is None else bit_error_rate
    rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng([config.seed, 1])
    params = model.parameters()
    result = TrainResult(initial_eval=heldout_mse(model, holdout_arr))
    for step, idx in enumerate(iterate_batches(len(images), config, rng)):
        batch = Tensor(images[idx])
        try:
            latent = model.encode_tensor(batch)
            noisy = dequantize(flip_bits(quantize(latent), rate, noise_rng))
            recon = model.decode_tensor(nk.straight_through(latent, noisy))
            loss = nk.mse_loss(recon, batch.data)
            loss.backward()
        except nk.NonFiniteError as exc:
            raise TrainingDiverged(step) from exc
        value = float(loss.data)
        nk.adam_step(params, config)
        result.losses.append(value)
        if callback is not None:
            callback(step, value)
    result.final_eval = heldout_mse(model, holdout_arr)
    return result


def save_codec(model: CodecModel, path) -> None:
    nk.save_checkpoint(path, model.state_dict(), model.meta())


def load_codec(path) -> CodecModel:
    tensors, meta = nk.load_checkpoint(path)
    if meta.get("kind") != "codec":
        raise nk.CheckpointError(f"{path} is not a codec checkpoint")
    model = CodecModel(RateConfig(meta["eta"], meta["height"], meta["width"]),
                       widths=meta["widths"], seed=meta["seed"])
    model.load_state_dict(tensors)
    return model
