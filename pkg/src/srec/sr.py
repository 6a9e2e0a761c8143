"""Residual dense network enhancer with a UNet attention map.

Forward order: mean shift, then three branches off the shifted input (UNet
weight map, shallow upsampling branch ``f1``, shallow features ``F0``), the
RDB stack, global feature fusion, attention modulation, upsampling, the global
residual add, a final 3x3 refinement and the inverse mean shift.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .codec import TrainingDiverged, TrainResult, iterate_batches
from .numkit import Conv2d, Tensor


@dataclass(frozen=True)
class RdnConfig:
    D: int = 3
    C: int = 4
    G: int = 16
    G0: int = 32
    scale: int = 2
    unet_width: int = 8

    def __post_init__(self):
        for name in ("D", "C", "G", "G0", "scale", "unet_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.scale not in (1, 2):
            raise ValueError("only scale factors 1 and 2 are supported")


class StageError(ValueError):
    pass


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except ValueError as exc:
        raise StageError(f"{name}: {exc}") from exc


class RDB(nk.Module):
    """Residual dense block: C densely connected 3x3 convs, 1x1 fusion, local residual."""

    def __init__(self, G0: int, G: int, C: int, rng):
        self.layers = [Conv2d(G0 + c * G, G, 3, rng=rng) for c in range(C)]
        self.lff = Conv2d(G0 + C * G, G0, 1, rng=rng)
        for c, layer in enumerate(self.layers, start=1):
            assert layer.in_channels == G0 + (c - 1) * G
        assert self.lff.out_channels == G0

    def __call__(self, x: Tensor, return_features: bool = False):
        if x.shape[-3] != self.lff.out_channels:
            raise ValueError(f"RDB expects {self.lff.out_channels} channels, got {x.shape[-3]}")
        feats = [x]
        for layer in self.layers:
            inp = feats[0] if len(feats) == 1 else nk.concat(feats)
            feats.append(nk.relu(layer(inp)))
        fused = self.lff(nk.concat(feats))
        out = nk.add(x, fused)
        return (out, feats) if return_features else out


class UNet(nk.Module):
    """Four down blocks (conv+ReLU+avg-pool) and four up blocks (nearest x2, concat skip, conv+ReLU)."""

    levels = 4

    def __init__(self, out_channels: int, width: int, rng):
        widths = [min(width * 2 ** i, 4 * width) for i in range(self.levels)]
        self.down = []
        c = 3
        for w in widths:
            self.down.append(Conv2d(c, w, 3, rng=rng))
            c = w
        self.up = []
        for w in reversed(widths):
            self.up.append(Conv2d(c + w, w, 3, rng=rng))
            c = w
        self.head = Conv2d(c, out_channels, 1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        factor = 2 ** self.levels
        if h % factor or w % factor:
            raise ValueError(f"UNet needs extents divisible by {factor}, got {h}x{w}")
        skips = []
        for conv in self.down:
            x = nk.relu(conv(x))
            skips.append(x)
            x = nk.resample(x, "down")
        for conv, skip in zip(self.up, reversed(skips)):
            x = nk.concat([nk.resample(x, "up"), skip])
            x = nk.relu(conv(x))
        return nk.sigmoid(self.head(x))


class RdnModel(nk.Module):
    def __init__(self, config: RdnConfig = RdnConfig(), means=(0.5, 0.5, 0.5), seed: int = 0):
        self.config = config
        self.seed = seed
        self.means = np.asarray(means, dtype=np.float64)
        cfg = config
        r2 = cfg.scale ** 2
        rng = np.random.default_rng(seed)
        self.unet = UNet(cfg.G0, cfg.unet_width, rng)
        self.up1 = Conv2d(3, 3 * r2, 3, rng=rng)
        self.sfe1 = Conv2d(3, cfg.G0, 3, rng=rng)
        self.sfe2 = Conv2d(cfg.G0, cfg.G0, 3, rng=rng)
        self.rdbs = [RDB(cfg.G0, cfg.G, cfg.C, rng) for _ in range(cfg.D)]
        self.gff1 = Conv2d(cfg.D * cfg.G0, cfg.G0, 1, rng=rng)
        self.gff2 = Conv2d(cfg.G0, cfg.G0, 3, rng=rng)
        self.up2 = Conv2d(cfg.G0, 3 * r2, 3, rng=rng)
        self.final = Conv2d(3, 3, 3, rng=rng)
        assert self.gff1.in_channels == cfg.D * cfg.G0

    def meta(self) -> dict:
        c = self.config
        return {"kind": "rdn", "D": c.D, "C": c.C, "G": c.G, "G0": c.G0, "scale": c.scale,
                "unet_width": c.unet_width, "means": [float(m) for m in self.means], "seed": self.seed}

    def sub_mean(self, x: Tensor) -> Tensor:
        return nk.channel_shift(x, -self.means)

    def add_mean(self, x: Tensor) -> Tensor:
        return nk.channel_shift(x, self.means)


def unet_attention(model: RdnModel, x0: Tensor) -> Tensor:
    return model.unet(x0)


def rdb_forward(block: RDB, features: Tensor) -> Tensor:
    return block(features)


def rdn_forward(model: RdnModel, x_hat) -> Tensor:
    """Enhance a ``3 x H x W`` (or batched) image to ``3 x rH x rW``."""
    x = x_hat if isinstance(x_hat, Tensor) else Tensor(x_hat)
    r = model.config.scale
    with _stage("input"):
        if x.shape[-3] != 3:
            raise ValueError(f"expected 3 channels, got {x.shape[-3]}")
        if x.shape[-1] % 16 or x.shape[-2] % 16:
            raise ValueError(f"extents {x.shape[-2]}x{x.shape[-1]} must be divisible by 16")
    with _stage("sub_mean"):
        x0 = model.sub_mean(x)
    with _stage("unet"):
        weight = unet_attention(model, x0)
    with _stage("up1"):
        f1 = nk.pixel_shuffle(model.up1(x0), r)
    with _stage("sfe"):
        feat = model.sfe2(model.sfe1(x0))
    outs = []
    for d, block in enumerate(model.rdbs, start=1):
        with _stage(f"rdb{d}"):
            feat = rdb_forward(block, feat)
        outs.append(feat)
    with _stage("gff"):
        gf = model.gff2(model.gff1(nk.concat(outs)))
    with _stage("modulate"):
        mod = nk.mul(gf, weight)
    with _stage("up2"):
        up = nk.pixel_shuffle(model.up2(mod), r)
    with _stage("global_residual"):
        res = nk.add(up, f1)
    with _stage("final"):
        out = model.final(res)
    with _stage("add_mean"):
        return model.add_mean(out)


def enhance(model: RdnModel, image: np.ndarray) -> np.ndarray:
    """Inference helper: clamp the enhanced image to [0, 1]."""
    with nk.no_grad():
        out = rdn_forward(model, Tensor(image, dtype=nk.default_dtype()))
    return np.clip(out.data, 0.0, 1.0)


def _stack_pairs(pairs):
    if not pairs:
        raise ValueError("empty corpus")
    lows = np.stack([np.asarray(lo) for lo, _ in pairs]).astype(nk.default_dtype())
    highs = np.stack([np.asarray(hi) for _, hi in pairs]).astype(nk.default_dtype())
    return lows, highs


def heldout_mse(model: RdnModel, pairs, chunk: int = 16) -> float:
    lows, highs = _stack_pairs(pairs)
    total = sum(float(np.sum((enhance(model, lows[i:i + chunk]) - highs[i:i + chunk]) ** 2))
                for i in range(0, len(lows), chunk))
    return total / highs.size


def train_sr(model: RdnModel, pairs, config: nk.TrainConfig = nk.TrainConfig(), holdout=None,
             set_means: bool = True, callback=None) -> TrainResult:
    """Fit the enhancer on ``(degraded, ground_truth)`` pairs with MSE.

    With ``set_means`` the mean shift is set to the ground-truth channel means
    before training starts.
    """
    lows, highs = _stack_pairs(pairs)
    r = model.config.scale
    if highs.shape[-2:] != (lows.shape[-2] * r, lows.shape[-1] * r):
        raise ValueError(f"targets {highs.shape[-2:]} are not {r}x the inputs {lows.shape[-2:]}")
    if set_means:
        model.means = highs.mean(axis=(0, 2, 3)).astype(np.float64)
    holdout = holdout if holdout is not None else pairs
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    result = TrainResult(initial_eval=heldout_mse(model, holdout))
    for step, idx in enumerate(iterate_batches(len(lows), config, rng)):
        try:
            out = rdn_forward(model, Tensor(lows[idx]))
            loss = nk.mse_loss(out, highs[idx])
            loss.backward()
        except nk.NonFiniteError as exc:
            raise TrainingDiverged(step) from exc
        nk.adam_step(params, config)
        result.losses.append(float(loss.data))
        if callback is not None:
            callback(step, result.losses[-1])
    result.final_eval = heldout_mse(model, holdout)
    return result


def save_sr(model: RdnModel, path) -> None:
    nk.save_checkpoint(path, model.state_dict(), model.meta())


def load_sr(path) -> RdnModel:
    tensors, meta = nk.load_checkpoint(path)
    if meta.get("kind") != "rdn":
        raise nk.CheckpointError(f"{path} is not an RDN checkpoint")
    cfg = RdnConfig(meta["D"], meta["C"], meta["G"], meta["G0"], meta["scale"], meta["unet_width"])
    model = RdnModel(cfg, means=meta["means"], seed=meta["seed"])
    model.load_state_dict(tensors)
    return model
