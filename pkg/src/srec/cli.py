"""Command-line entry point: ``srec <subcommand> [--config FILE] [--key value ...]``.

Every option can also be set in a ``key = value`` config file; command-line
flags win over the file, which wins over the built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec, modem, sr
from . import numkit as nk
from .cipher import KeySeed
from .harness import config as cfgmod
from .harness import (ExperimentConfig, Models, eavesdrop_run, export_csv, export_summary, load_corpus,
                      make_sr_pairs, point_seeds, run_pipeline, save_png, sweep, train_codec_model,
                      train_sr_model, write_synthetic_corpus)
from .harness.corpus import CorpusImage

log = logging.getLogger("srec")

DEFAULTS = {
    "crop": 64,
    "eta": [0.2],
    "snr_db": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
    "schemes": ["bpsk", "qpsk", "16qam"],
    "scheme": ["qpsk"],
    "variants": ["plain", "encrypted", "srec", "eavesdropper"],
    "trials": 1,
    "seed": 0,
    "workers": 1,
    "eavesdropper_mirrors": "encrypted",
    "correct_key": False,
    "bits": 10**6,
    "scale": 2,
    "learning_rate": 5e-5,
    "batch_size": 8,
    "epochs": 50,
    "grad_clip": 0.0,
    "train_scheme": ["bpsk", "qpsk", "16qam"],
    "repeats": 1,
    "variant": "encrypted",
    "stream_index": 0,
    "noise_seed": 0,
    "count": 60,
    "size": 96,
    "verbose": False,
}

HELP = {
    "corpus": "directory of RGB PNG images",
    "crop": "centre-crop size in pixels",
    "eta": "bandwidth ratio(s), comma-separated",
    "snr_db": "Es/N0 value(s) in dB, comma-separated",
    "schemes": "modulation schemes for sweeps",
    "scheme": "modulation scheme(s)",
    "variants": "pipeline variants: plain, encrypted, srec, eavesdropper",
    "codec": "codec checkpoint ('{eta}' is replaced by each eta value)",
    "sr_codec": "codec checkpoint at the enhancer input resolution ('{eta}' allowed)",
    "sr": "enhancer checkpoint",
    "key": "key file (64 hex characters); default derives one from --seed",
    "out": "output path",
    "summary": "summary CSV path (default: <out stem>_summary.csv)",
    "csv": "CSV output path",
    "dump_images": "directory to write reconstructions as PNG",
    "eavesdropper_mirrors": "legitimate path the eavesdropper mirrors: encrypted or srec",
    "correct_key": "give the eavesdropper the legitimate key (sanity check)",
    "steps": "optimizer steps (overrides epochs)",
    "bit_error_rate": "bit-flip rate injected into latents during codec training",
    "train_scheme": "scheme(s) used to generate enhancer training pairs",
    "repeats": "transmissions per training image when generating enhancer pairs",
}

COMMANDS = {
    "keygen": ["out"],
    "synth-corpus": ["out", "count", "size", "seed"],
    "train-codec": ["corpus", "crop", "eta", "out", "learning_rate", "batch_size", "epochs", "steps",
                    "grad_clip", "bit_error_rate", "seed"],
    "train-sr": ["corpus", "codec", "snr_db", "scale", "out", "train_scheme", "repeats", "key",
                 "learning_rate", "batch_size", "epochs", "steps", "grad_clip", "seed"],
    "ber": ["scheme", "snr_db", "bits", "seed", "csv"],
    "sweep-snr": ["corpus", "crop", "codec", "sr", "sr_codec", "key", "variants", "schemes", "snr_db", "eta",
                  "trials", "seed", "workers", "out", "summary", "dump_images", "eavesdropper_mirrors"],
    "sweep-eta": ["corpus", "crop", "codec", "sr", "sr_codec", "key", "variants", "schemes", "snr_db", "eta",
                  "trials", "seed", "workers", "out", "summary", "dump_images", "eavesdropper_mirrors"],
    "eavesdrop": ["corpus", "crop", "codec", "sr", "sr_codec", "key", "schemes", "snr_db", "eta", "trials",
                  "seed", "workers", "out", "summary", "dump_images", "eavesdropper_mirrors", "correct_key"],
    "run-one": ["image", "crop", "codec", "sr", "sr_codec", "key", "variant", "scheme", "snr_db",
                "stream_index", "noise_seed", "seed", "out", "eavesdropper_mirrors"],
}

REQUIRED = {
    "keygen": ["out"],
    "synth-corpus": ["out"],
    "train-codec": ["corpus", "out"],
    "train-sr": ["corpus", "codec", "out"],
    "sweep-snr": ["corpus", "codec", "out"],
    "sweep-eta": ["corpus", "codec", "out"],
    "eavesdrop": ["corpus", "codec", "out"],
    "run-one": ["image", "codec"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srec", description="Encrypted semantic image transmission simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMANDS.items():
        p = sub.add_parser(name, help=(sys.modules[__name__].__dict__[f"cmd_{name.replace('-', '_')}"].__doc__
                                       or "").strip().splitlines()[0])
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("-v", "--verbose", action="store_const", const=True, default=None)
        for key in keys:
            flags = [f"--{key.replace('_', '-')}"] + ([f"--{key}"] if "_" in key else [])
            if cfgmod.SCHEMA[key] is cfgmod._bool:
                p.add_argument(*flags, dest=key, nargs="?", const=True, default=None,
                               type=cfgmod.SCHEMA[key], help=HELP.get(key))
            else:
                p.add_argument(*flags, dest=key, default=None, type=cfgmod.SCHEMA[key], help=HELP.get(key))
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (in increasing precedence)."""
    keys = COMMANDS[args.command]
    values = {k: DEFAULTS[k] for k in keys if k in DEFAULTS}
    values["verbose"] = False
    if args.config:
        from_file = cfgmod.load_config(args.config)
        values.update(from_file)
    for k in keys + ["verbose"]:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    missing = [k for k in REQUIRED.get(args.command, []) if values.get(k) is None]
    if missing:
        raise SystemExit(f"srec {args.command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return values


def _single(values: dict, key: str):
    v = values[key]
    if isinstance(v, list):
        if len(v) != 1:
            raise SystemExit(f"--{key.replace('_', '-')} takes a single value here, got {v}")
        return v[0]
    return v


def _train_config(values: dict) -> nk.TrainConfig:
    return nk.TrainConfig(learning_rate=values["learning_rate"], batch_size=values["batch_size"],
                          epochs=values["epochs"], grad_clip=values["grad_clip"], max_steps=values.get("steps"),
                          seed=values["seed"])


def _progress(step: int, loss: float) -> None:
    if step % 100 == 0:
        log.info("step %d loss %.6f", step, loss)


def _key(values: dict) -> KeySeed:
    if values.get("key"):
        return KeySeed.load(values["key"])
    return KeySeed.from_int(values["seed"])


def _models(values: dict, eta: float) -> Models:
    def path(key):
        p = values.get(key)
        return p.replace("{eta}", f"{eta:g}") if p else None

    main = codec.load_codec(path("codec"))
    if abs(main.rate.eta - eta) > 1e-12:
        raise SystemExit(f"codec {path('codec')} was trained for eta={main.rate.eta}, not {eta}")
    enhancer = sr.load_sr(values["sr"]) if values.get("sr") else None
    sr_codec = codec.load_codec(path("sr_codec")) if values.get("sr_codec") else None
    return Models(main, enhancer, sr_codec, values.get("eavesdropper_mirrors", "encrypted"))


def _experiment(values: dict, variants=None) -> ExperimentConfig:
    return ExperimentConfig(variants=variants or values["variants"], schemes=values["schemes"],
                            snr_db=values["snr_db"], eta=values["eta"], trials=values["trials"],
                            seed=values["seed"], workers=values["workers"], dump_images=values.get("dump_images"))


def _summary_path(values: dict) -> Path:
    if values.get("summary"):
        return Path(values["summary"])
    out = Path(values["out"])
    return out.with_name(out.stem + "_summary.csv")


def _write_outputs(records, values: dict) -> None:
    export_csv(records, values["out"])
    rows = export_summary(records, _summary_path(values))
    failed = sum(r.failed for r in records)
    print(f"{len(records)} records ({failed} failed) -> {values['out']}; summary -> {_summary_path(values)}")
    for row in rows:
        log.info("%s %s snr=%g eta=%g mean_psnr=%.3f", row.variant, row.scheme, row.snr_db, row.eta,
                 row.mean_psnr_db)


def cmd_keygen(values: dict) -> None:
    """Write a fresh random 32-byte key seed as 64 hex characters."""
    KeySeed.generate().save(values["out"])
    print(f"key written to {values['out']}")


def cmd_synth_corpus(values: dict) -> None:
    """Write a deterministic procedural PNG corpus (stand-in for natural images)."""
    files = write_synthetic_corpus(values["out"], values["count"], values["size"], values["seed"])
    print(f"{len(files)} images written to {values['out']}")


def cmd_train_codec(values: dict) -> None:
    """Train the JSCC codec on a corpus and save a checkpoint."""
    eta = _single(values, "eta")
    images = load_corpus(values["corpus"], values["crop"])
    model, result = train_codec_model(images, eta, values["crop"], _train_config(values), seed=values["seed"],
                                      bit_error_rate=values.get("bit_error_rate"), callback=_progress)
    codec.save_codec(model, values["out"])
    print(json.dumps({"steps": len(result.losses), "initial_mse": result.initial_eval,
                      "final_mse": result.final_eval, "latent_bytes": model.rate.latent_byte_count}))


def cmd_train_sr(values: dict) -> None:
    """Train the enhancer on pairs produced by the frozen codec + cipher + modem chain."""
    frozen = codec.load_codec(values["codec"])
    scale = values["scale"]
    crop = frozen.rate.height * scale
    images = load_corpus(values["corpus"], crop)
    pairs = make_sr_pairs(images, frozen, scale, _single(values, "snr_db"), values["train_scheme"],
                          key_seed=_key(values), seed=values["seed"], repeats=values["repeats"])
    model, result = train_sr_model(pairs, scale, _train_config(values), seed=values["seed"], callback=_progress)
    sr.save_sr(model, values["out"])
    print(json.dumps({"pairs": len(pairs), "steps": len(result.losses), "initial_mse": result.initial_eval,
                      "final_mse": result.final_eval}))


def cmd_ber(values: dict) -> None:
    """Monte Carlo BER against the closed form for each scheme and SNR."""
    lines = ["scheme,snr_db,ebn0_db,measured_ber,theoretical_ber,bits"]
    for name in values["scheme"]:
        scheme = modem.Scheme.parse(name)
        for snr in values["snr_db"]:
            measured = modem.measured_ber(scheme, snr, values["bits"], values["seed"])
            lines.append(f"{scheme.value},{snr:.6f},{modem.ebn0_db(scheme, snr):.6f},{measured:.9f},"
                         f"{modem.theoretical_ber(scheme, snr):.9f},{values['bits']}")
    text = "\n".join(lines) + "\n"
    if values.get("csv"):
        with open(values["csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _sweep(values: dict) -> None:
    images = load_corpus(values["corpus"], values["crop"])
    config = _experiment(values)
    bank = {eta: _models(values, eta) for eta in config.eta}
    _write_outputs(sweep(config, images, bank, _key(values)), values)


def cmd_sweep_snr(values: dict) -> None:
    """PSNR versus SNR for every variant and scheme at a fixed eta."""
    if len(values["eta"]) != 1:
        raise SystemExit("sweep-snr takes a single --eta; use sweep-eta for an eta grid")
    _sweep(values)


def cmd_sweep_eta(values: dict) -> None:
    """PSNR versus eta (one codec checkpoint per eta via '{eta}' in --codec)."""
    if len(values["eta"]) > 1 and "{eta}" not in (values.get("codec") or ""):
        raise SystemExit("sweep-eta with several eta values needs '{eta}' in --codec")
    _sweep(values)


def cmd_eavesdrop(values: dict) -> None:
    """Eavesdropper sweep: true models, ciphertext intercepted, wrong keystream."""
    images = load_corpus(values["corpus"], values["crop"])
    config = _experiment(values, variants=["eavesdropper"])
    bank = {eta: _models(values, eta) for eta in config.eta}
    records = eavesdrop_run(config, images, bank, _key(values), correct_key=bool(values["correct_key"]))
    _write_outputs(records, values)


def cmd_run_one(values: dict) -> None:
    """Send one image through one variant and print its record."""
    from PIL import Image
    from .harness.corpus import center_crop

    with Image.open(values["image"]) as im:
        rgb = np.asarray(im.convert("RGB"))
    crop = values["crop"]
    if min(rgb.shape[:2]) < crop:
        raise SystemExit(f"image smaller than crop {crop}")
    img = CorpusImage(Path(values["image"]).stem,
                      np.ascontiguousarray(center_crop(rgb, crop).transpose(2, 0, 1)).astype(np.float32) / 255)
    snr = _single(values, "snr_db")
    main = codec.load_codec(values["codec"])
    models = Models(main, sr.load_sr(values["sr"]) if values.get("sr") else None,
                    codec.load_codec(values["sr_codec"]) if values.get("sr_codec") else None,
                    values["eavesdropper_mirrors"])
    eve = None
    if values["variant"] == "eavesdropper":
        eve = point_seeds(values["seed"], "eavesdropper", "run-one", 0, 0, 0, values["stream_index"]).eavesdropper_key
    rec = run_pipeline(img.data, values["variant"], _single(values, "scheme"),
                       modem.ChannelConfig(snr, noise_seed=values["noise_seed"]), models, _key(values),
                       values["stream_index"], eavesdropper_key=eve, image_id=img.name)
    print(json.dumps({"variant": rec.variant, "scheme": rec.scheme, "snr_db": rec.snr_db, "eta": rec.eta,
                      "image": rec.image, "psnr_db": round(rec.psnr_db, 6), "byte_errors": rec.byte_errors}))
    if values.get("out"):
        save_png(rec.reconstruction, values["out"])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = resolve(args)
    except cfgmod.ConfigError as exc:
        parser.error(str(exc))
    logging.basicConfig(level=logging.INFO if values.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = globals()[f"cmd_{args.command.replace('-', '_')}"]
    handler(values)
    return 0


if __name__ == "__main__":
    sys.exit(main())
