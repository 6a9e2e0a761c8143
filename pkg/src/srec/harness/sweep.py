"""Experiment sweeps over (variant, scheme, SNR, eta, image, trial) with reproducible seeding."""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..cipher import KeySeed
from ..modem import ChannelConfig, Scheme
from .corpus import CorpusImage, save_png
from .pipeline import VARIANTS, Models, PipelineError, RunRecord, run_pipeline

log = logging.getLogger(__name__)

CSV_HEADER = "variant,scheme,snr_db,eta,image,trial,psnr_db,byte_errors"
SUMMARY_HEADER = "variant,scheme,snr_db,eta,runs,failed,mean_psnr_db,std_psnr_db,mean_byte_errors"


@dataclass
class ExperimentConfig:
    variants: Sequence[str] = ("plain", "encrypted", "srec", "eavesdropper")
    schemes: Sequence[str] = ("bpsk", "qpsk", "16qam")
    snr_db: Sequence[float] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    eta: Sequence[float] = (0.2,)
    trials: int = 1
    seed: int = 0
    workers: int = 1
    dump_images: str | None = None

    def __post_init__(self):
        self.variants = tuple(self.variants)
        self.schemes = tuple(Scheme.parse(s).value for s in self.schemes)
        self.snr_db = tuple(float(s) for s in self.snr_db)
        self.eta = tuple(float(e) for e in self.eta)
        for name in ("variants", "schemes", "snr_db", "eta"):
            if not getattr(self, name):
                raise ValueError(f"{name} grid must not be empty")
        bad = set(self.variants) - set(VARIANTS)
        if bad:
            raise ValueError(f"unknown variants {sorted(bad)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class PointSeeds:
    noise_seed: int
    stream_index: int
    eavesdropper_key: KeySeed


def point_seeds(master: int, variant: str, scheme: str, snr_index: int, eta_index: int,
                image_index: int, trial: int) -> PointSeeds:
    """Order-independent per-point randomness: a hash of the point's coordinates."""
    label = f"srec/point|{master}|{variant}|{scheme}|{snr_index}|{eta_index}|{image_index}|{trial}"
    digest = hashlib.sha256(label.encode()).digest()
    return PointSeeds(
        noise_seed=int.from_bytes(digest[:8], "little"),
        stream_index=int.from_bytes(digest[8:16], "little") >> 1,
        eavesdropper_key=KeySeed(hashlib.sha256(b"srec/eavesdropper" + digest).digest()),
    )


@dataclass
class _Task:
    order: tuple
    variant: str
    scheme: str
    snr_db: float
    eta: float
    image: CorpusImage
    trial: int
    seeds: PointSeeds
    models: Models
    eavesdropper_key: KeySeed | None


def _resolve_models(models, etas) -> dict[float, Models]:
    if isinstance(models, Models):
        bank = {models.eta: models}
    else:
        bank = dict(models)
    missing = [e for e in etas if e not in bank]
    if missing:
        raise ValueError(f"no models for eta values {missing}")
    return bank


def _run_task(task: _Task, key_seed: KeySeed) -> RunRecord:
    channel = ChannelConfig(task.snr_db, noise_seed=task.seeds.noise_seed)
    try:
        rec = run_pipeline(task.image.data, task.variant, task.scheme, channel, task.models, key_seed,
                           task.seeds.stream_index, eavesdropper_key=task.eavesdropper_key,
                           image_id=task.image.name, trial=task.trial, seed=task.seeds.noise_seed)
    except (PipelineError, ValueError) as exc:
        log.warning("point %s/%s/%.3g dB/eta %.3g/%s/%d failed: %s", task.variant, task.scheme,
                    task.snr_db, task.eta, task.image.name, task.trial, exc)
        rec = RunRecord(task.variant, task.scheme, task.snr_db, task.eta, task.image.name, task.trial,
                        math.nan, -1, task.seeds.noise_seed, 0.0, str(exc))
    rec.eta = task.eta
    return rec


def _build_tasks(config: ExperimentConfig, images: Sequence[CorpusImage], bank: Mapping[float, Models],
                 variant_override: str | None = None, correct_key: KeySeed | None = None) -> list[_Task]:
    tasks = []
    for vi, variant in enumerate(config.variants if variant_override is None else (variant_override,)):
        for si, scheme in enumerate(config.schemes):
            for ni, snr in enumerate(config.snr_db):
                for ei, eta in enumerate(config.eta):
                    for ii, img in enumerate(images):
                        for trial in range(config.trials):
                            # a correct-key eavesdropper sees exactly the legitimate encrypted transmission
                            seed_variant = "encrypted" if correct_key is not None else variant
                            seeds = point_seeds(config.seed, seed_variant, scheme, ni, ei, ii, trial)
                            eve = None
                            if variant == "eavesdropper":
                                eve = correct_key if correct_key is not None else seeds.eavesdropper_key
                            tasks.append(_Task((vi, si, ni, ei, ii, trial), variant, scheme, snr, eta, img,
                                               trial, seeds, bank[eta], eve))
    return tasks


def _execute(tasks: list[_Task], config: ExperimentConfig, key_seed: KeySeed) -> list[RunRecord]:
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(lambda t: _run_task(t, key_seed), tasks))
    else:
        records = [_run_task(t, key_seed) for t in tasks]
    paired = sorted(zip((t.order for t in tasks), records), key=lambda p: p[0])
    records = [r for _, r in paired]
    if config.dump_images:
        out = Path(config.dump_images)
        out.mkdir(parents=True, exist_ok=True)
        for r in records:
            if r.reconstruction is not None:
                save_png(r.reconstruction, out / image_filename(r))
    return records


def image_filename(r: RunRecord) -> str:
    return f"{r.variant}_{r.scheme}_snr{r.snr_db:g}_eta{r.eta:g}_{r.image}_t{r.trial}.png"


def sweep(config: ExperimentConfig, images: Sequence[CorpusImage], models, key_seed: KeySeed | None = None
          ) -> list[RunRecord]:
    """Run the full cross-product; failed points are kept as flagged records.

    ``models`` is a :class:`Models` (single eta) or a mapping eta -> Models.
    Without ``key_seed`` the legitimate key is derived from the master seed.
    """
    if not images:
        raise ValueError("no images to sweep over")
    bank = _resolve_models(models, config.eta)
    key_seed = key_seed if key_seed is not None else KeySeed.from_int(config.seed)
    return _execute(_build_tasks(config, images, bank), config, key_seed)


def eavesdrop_run(config: ExperimentConfig, images: Sequence[CorpusImage], models,
                  key_seed: KeySeed | None = None, correct_key: bool = False) -> list[RunRecord]:
    """Sweep with the variant forced to ``eavesdropper``.

    The eavesdropper holds the true models and intercepts the ciphertext but
    decrypts with a fresh random keystream per point. With ``correct_key`` it is
    handed the legitimate key instead and reproduces the encrypted-variant
    records of :func:`sweep` under the same master seed.
    """
    bank = _resolve_models(models, config.eta)
    key_seed = key_seed if key_seed is not None else KeySeed.from_int(config.seed)
    cfg = replace(config, variants=("eavesdropper",))
    tasks = _build_tasks(cfg, images, bank, "eavesdropper", key_seed if correct_key else None)
    return _execute(tasks, cfg, key_seed)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def format_record(r: RunRecord) -> str:
    return ",".join([r.variant, r.scheme, _fmt(r.snr_db), _fmt(r.eta), r.image, str(r.trial),
                     _fmt(r.psnr_db), str(r.byte_errors)])


def export_csv(records: Sequence[RunRecord], path) -> None:
    """Raw per-run CSV: UTF-8, LF endings, 6 decimals; failed runs have ``nan`` PSNR and -1 byte errors."""
    lines = [CSV_HEADER] + [format_record(r) for r in records]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> list[RunRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {lines[0] if lines else ''!r}")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        variant, scheme, snr, eta, image, trial, value, errors = line.split(",")
        psnr_db = float(value)
        records.append(RunRecord(variant, scheme, float(snr), float(eta), image, int(trial), psnr_db,
                                 int(errors), error="failed" if math.isnan(psnr_db) else None))
    return records


@dataclass
class SummaryRow:
    variant: str
    scheme: str
    snr_db: float
    eta: float
    runs: int
    failed: int
    mean_psnr_db: float
    std_psnr_db: float
    mean_byte_errors: float
    psnrs: list[float] = field(default_factory=list, repr=False)


def summarize(records: Sequence[RunRecord]) -> list[SummaryRow]:
    """Average per (variant, scheme, snr, eta) point, in first-appearance order."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.variant, r.scheme, r.snr_db, r.eta), []).append(r)
    rows = []
    for (variant, scheme, snr, eta), recs in groups.items():
        ok = [r for r in recs if not r.failed]
        vals = [r.psnr_db for r in ok]
        rows.append(SummaryRow(variant, scheme, snr, eta, len(recs), len(recs) - len(ok),
                               float(np.mean(vals)) if vals else math.nan,
                               float(np.std(vals)) if vals else math.nan,
                               float(np.mean([r.byte_errors for r in ok])) if ok else math.nan, vals))
    return rows


def export_summary(records: Sequence[RunRecord], path) -> list[SummaryRow]:
    rows = summarize(records)
    lines = [SUMMARY_HEADER] + [
        ",".join([s.variant, s.scheme, _fmt(s.snr_db), _fmt(s.eta), str(s.runs), str(s.failed),
                  _fmt(s.mean_psnr_db), _fmt(s.std_psnr_db), _fmt(s.mean_byte_errors)])
        for s in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return rows


def mean_psnr(records: Sequence[RunRecord], **where) -> float:
    """Mean PSNR of the successful records matching every ``field=value`` filter."""
    vals = [r.psnr_db for r in records
            if not r.failed and all(getattr(r, k) == v for k, v in where.items())]
    if not vals:
        raise ValueError(f"no records match {where}")
    return float(np.mean(vals))
