"""Configuration: a UTF-8 key=value document plus NAND_* environment overrides.

Every key maps to an environment variable by uppercasing and replacing dots
with underscores under the NAND_ prefix, e.g. phrase_generator.url becomes
NAND_PHRASE_GENERATOR_URL.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

__all__ = ["Config", "ConfigError", "load_config"]


class ConfigError(Exception):
    pass


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        size = (int(h), int(w))
    except ValueError as exc:
        raise ConfigError(f"bad size {text!r}, expected HxW") from exc
    if size[0] < 1 or size[1] < 1:
        raise ConfigError(f"size must be positive, got {text!r}")
    return size


def _parse_layout(text: str) -> tuple[tuple[int, int, int], ...]:
    layers = []
    for part in text.split(","):
        try:
            h, w, d = (int(v) for v in part.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"bad layout entry {part!r}, expected HxWxD") from exc
        layers.append((h, w, d))
    if not layers:
        raise ConfigError("stub layout must declare at least one layer")
    return tuple(layers)


def _parse_layers(text: str) -> tuple[int, ...] | None:
    text = text.strip()
    if not text:
        return None
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad layer list {text!r}") from exc


@dataclass
class Config:
    dataset_root: Path = Path("data")
    cache_dir: Path = Path("cache")
    encoder: str = "stub"  # stub | cache
    stub_seed: int = 42
    stub_layout: tuple[tuple[int, int, int], ...] = ((16, 16, 256), (8, 8, 256))
    stub_text_dim: int = 256
    detector: str = "zs"  # zs | bank | external
    layers: tuple[int, ...] | None = None  # None = all layers in the file
    bank_layer: int = 0
    coreset_fraction: float = 0.1
    smoothing_sigma: float = 0.0
    detector_size: tuple[int, int] = (64, 64)
    suppression_size: tuple[int, int] = (256, 256)
    external_map_dir: Path | None = None
    projection_path: Path | None = None
    templates_path: Path | None = None
    states_normal_path: Path | None = None
    states_abnormal_path: Path | None = None
    group_table_path: Path | None = None
    phrase_generator_url: str | None = None  # key: phrase_generator.url
    phrase_generator_command: str | None = None  # key: phrase_generator.command
    service_port: int = 8765

    def validate(self) -> None:
        if not 0.0 < self.coreset_fraction <= 1.0:
            raise ConfigError(
                f"coreset_fraction must be in (0, 1], got {self.coreset_fraction}"
            )
        if self.smoothing_sigma < 0:
            raise ConfigError(f"smoothing_sigma must be >= 0, got {self.smoothing_sigma}")
        if self.encoder not in ("stub", "cache"):
            raise ConfigError(f"encoder must be stub or cache, got {self.encoder!r}")
        if self.detector not in ("zs", "bank", "external"):
            raise ConfigError(f"detector must be zs, bank, or external, got {self.detector!r}")
        if not 1 <= self.service_port <= 65535:
            raise ConfigError(f"service_port out of range: {self.service_port}")
        for name in (
            "projection_path",
            "templates_path",
            "states_normal_path",
            "states_abnormal_path",
            "group_table_path",
            "external_map_dir",
        ):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name} does not exist: {p}")


_KEY_ALIASES = {
    "phrase_generator.url": "phrase_generator_url",
    "phrase_generator.command": "phrase_generator_command",
}

_PATH_FIELDS = {
    "dataset_root",
    "cache_dir",
    "external_map_dir",
    "projection_path",
    "templates_path",
    "states_normal_path",
    "states_abnormal_path",
    "group_table_path",
}
_INT_FIELDS = {"stub_seed", "stub_text_dim", "bank_layer", "service_port"}
_FLOAT_FIELDS = {"coreset_fraction", "smoothing_sigma"}
_SIZE_FIELDS = {"detector_size", "suppression_size"}
_STR_FIELDS = {"encoder", "detector", "phrase_generator_url", "phrase_generator_command"}


def _assign(cfg: Config, key: str, value: str, source: str) -> None:
    name = _KEY_ALIASES.get(key, key)
    valid = {f.name for f in fields(Config)}
    if name not in valid:
        raise ConfigError(f"unknown config key {key!r} ({source})")
    value = value.strip()
    try:
        if name in _PATH_FIELDS:
            setattr(cfg, name, Path(value) if value else None)
        elif name in _INT_FIELDS:
            setattr(cfg, name, int(value))
        elif name in _FLOAT_FIELDS:
            setattr(cfg, name, float(value))
        elif name in _SIZE_FIELDS:
            setattr(cfg, name, _parse_size(value))
        elif name == "stub_layout":
            setattr(cfg, name, _parse_layout(value))
        elif name == "layers":
            setattr(cfg, name, _parse_layers(value))
        elif name in _STR_FIELDS:
            setattr(cfg, name, value or None)
        else:
            raise ConfigError(f"unhandled config key {key!r}")
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({source})") from exc
    if name in ("dataset_root", "cache_dir") and getattr(cfg, name) is None:
        raise ConfigError(f"{key} must not be empty")


def _env_key(field_name: str) -> str:
    dotted = next((k for k, v in _KEY_ALIASES.items() if v == field_name), field_name)
    return "NAND_" + dotted.upper().replace(".", "_")


def load_config(path: str | Path | None = None, env: dict | None = None) -> Config:
    """Parse the config file (if any), apply environment overrides, validate."""
    cfg = Config()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, value = line.partition("=")
            _assign(cfg, key.strip(), value, f"{path}:{lineno}")
    env = os.environ if env is None else env
    for f in fields(Config):
        var = _env_key(f.name)
        if var in env:
            dotted = next((k for k, v in _KEY_ALIASES.items() if v == f.name), f.name)
            _assign(cfg, dotted, env[var], f"env {var}")
    cfg.validate()
    return cfg
