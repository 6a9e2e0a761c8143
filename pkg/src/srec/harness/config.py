"""``key = value`` experiment configuration files.

One key per line, ``#`` starts a comment, list values are comma-separated.
Keys share their names with the CLI flags that override them.
"""

from __future__ import annotations

from pathlib import Path


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(kind):
    def parse(text: str):
        items = [t.strip() for t in str(text).split(",")]
        if any(not t for t in items):
            raise ValueError(f"empty element in list {text!r}")
        return [kind(t) for t in items]
    parse.__name__ = f"list_of_{kind.__name__}"
    return parse


# key -> parser; the same table drives file parsing and CLI flag types
SCHEMA = {
    "corpus": str,
    "crop": int,
    "eta": _list(float),
    "snr_db": _list(float),
    "schemes": _list(str),
    "scheme": _list(str),
    "variants": _list(str),
    "trials": int,
    "seed": int,
    "workers": int,
    "codec": str,
    "sr_codec": str,
    "sr": str,
    "key": str,
    "out": str,
    "summary": str,
    "csv": str,
    "dump_images": str,
    "eavesdropper_mirrors": str,
    "correct_key": _bool,
    "bits": int,
    "scale": int,
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "steps": int,
    "grad_clip": float,
    "bit_error_rate": float,
    "train_scheme": _list(str),
    "repeats": int,
    "image": str,
    "variant": str,
    "stream_index": int,
    "noise_seed": int,
    "count": int,
    "size": int,
    "verbose": _bool,
}


class ConfigError(ValueError):
    pass


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return SCHEMA[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    return values


def load_config(path) -> dict:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p))
