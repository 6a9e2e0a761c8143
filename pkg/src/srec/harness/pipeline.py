"""One transmission through the full chain for a single image and variant."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field

import numpy as np

from .. import cipher, codec, modem, sr
from .. import numkit as nk
from ..cipher import KeySeed
from ..codec import CodecModel
from ..modem import ChannelConfig, Scheme
from ..sr import RdnModel
from .corpus import downscale

VARIANTS = ("plain", "encrypted", "srec", "eavesdropper")
PSNR_CAP = 100.0


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:  # annotate and re-raise any stage failure
        raise PipelineError(name, exc) from exc


def psnr(reference, candidate) -> float:
    """PSNR in dB with peak value 1; identical inputs give the 100 dB cap."""
    ref = np.asarray(getattr(reference, "data", reference), dtype=np.float64)
    cand = np.asarray(getattr(candidate, "data", candidate), dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValueError(f"psnr: shape mismatch {ref.shape} vs {cand.shape}")
    mse = float(np.mean((ref - cand) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10 * np.log10(1.0 / mse))


@dataclass
class Models:
    """Trained models for one rate point.

    ``codec`` serves the plain/encrypted/eavesdropper variants at full crop.
    The srec variant uses ``sr_codec`` (the codec at the enhancer's input
    resolution, i.e. crop / scale) followed by ``sr``. With scale 1 it may be
    left unset, in which case ``codec`` is reused.
    """

    codec: CodecModel
    sr: RdnModel | None = None
    sr_codec: CodecModel | None = None
    eavesdropper_mirrors: str = "encrypted"

    def __post_init__(self):
        if self.eavesdropper_mirrors not in ("encrypted", "srec"):
            raise ValueError("eavesdropper_mirrors must be 'encrypted' or 'srec'")

    def codec_for(self, variant: str) -> CodecModel:
        if self.uses_sr(variant):
            if self.sr is None:
                raise ValueError(f"variant {variant!r} needs an enhancer model")
            if self.sr.config.scale == 1:
                return self.sr_codec or self.codec
            if self.sr_codec is None:
                raise ValueError("scale-2 enhancement needs a codec at the reduced resolution")
            return self.sr_codec
        return self.codec

    def uses_sr(self, variant: str) -> bool:
        return variant == "srec" or (variant == "eavesdropper" and self.eavesdropper_mirrors == "srec")

    @property
    def eta(self) -> float:
        return self.codec.rate.eta


@dataclass
class RunRecord:
    variant: str
    scheme: str
    snr_db: float
    eta: float
    image: str
    trial: int
    psnr_db: float
    byte_errors: int
    seed: int = 0
    elapsed: float = 0.0
    error: str | None = None
    reconstruction: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None


def run_pipeline(image: np.ndarray, variant: str, scheme, channel: ChannelConfig, models: Models,
                 key_seed: KeySeed | None, stream_index: int = 0, *, eavesdropper_key: KeySeed | None = None,
                 image_id: str = "", trial: int = 0, seed: int = 0) -> RunRecord:
    """encode -> quantize -> [encrypt] -> modulate -> AWGN -> demodulate -> [decrypt] -> decode -> [enhance] -> PSNR.

    Encrypted variants derive the keystream from ``key_seed`` at
    ``stream_index``. The eavesdropper intercepts the ciphertext but decrypts
    with a keystream from ``eavesdropper_key``. Byte errors are counted between
    the transmitted and received byte streams, before decryption.
    """
    start = time.perf_counter()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    scheme = Scheme.parse(scheme)
    encrypted = variant != "plain"
    with _stage("setup"):
        reference = np.asarray(getattr(image, "data", image), dtype=np.float32)
        model = models.codec_for(variant)
        use_sr = models.uses_sr(variant)
        factor = models.sr.config.scale if use_sr else 1
        if encrypted and key_seed is None:
            raise ValueError("encrypted variants need a key seed")
        if variant == "eavesdropper" and eavesdropper_key is None:
            raise ValueError("the eavesdropper variant needs its own (wrong) key seed")
    with _stage("encode"):
        source = downscale(reference, factor)
        with nk.no_grad():
            plain_bytes = codec.quantize(codec.encode(model, source))
    n = len(plain_bytes)
    tx = plain_bytes
    if encrypted:
        with _stage("encrypt"):
            key = cipher.derive_keystream(key_seed, n, stream_index)
            tx = cipher.encrypt_bytes(plain_bytes, key)
    with _stage("modulate"):
        frame = modem.modulate(modem.pack_bits(tx), scheme)
    with _stage("channel"):
        received = modem.transmit_awgn(frame, channel)
    with _stage("demodulate"):
        rx = modem.unpack_bits(modem.demodulate(received, channel), n)
    byte_errors = int(np.count_nonzero(rx != tx))
    recovered = rx
    if encrypted:
        with _stage("decrypt"):
            seed_for_rx = eavesdropper_key if variant == "eavesdropper" else key_seed
            recovered = cipher.decrypt_bytes(rx, cipher.derive_keystream(seed_for_rx, n, stream_index))
    with _stage("decode"):
        recon = codec.decode(model, recovered)
    if use_sr:
        with _stage("enhance"):
            recon = sr.enhance(models.sr, recon)
    with _stage("psnr"):
        value = psnr(reference, recon)
    return RunRecord(variant, scheme.value, float(channel.snr_db), float(models.eta), image_id, trial,
                     float(value), byte_errors, seed, time.perf_counter() - start, None,
                     recon.astype(np.float32))
