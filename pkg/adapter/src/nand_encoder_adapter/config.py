"""Adapter configuration: a key=value file, same dialect as the main toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class AdapterConfigError(Exception):
    pass


@dataclass
class AdapterConfig:
    model_id: str = "random-tiny:7"
    layers: tuple[int, ...] = (1, 2)  # 1-based transformer block indices
    input_resolution: int = 32
    dataset_root: Path = Path("data")
    output_dir: Path = Path("cache")
    batch_size: int = 8
    write_global: bool = True

    def validate(self) -> None:
        if self.input_resolution < 1:
            raise AdapterConfigError("input_resolution must be >= 1")
        if self.batch_size < 1:
            raise AdapterConfigError("batch_size must be >= 1")
        if not self.layers:
            raise AdapterConfigError("at least one layer index required")
        if any(l < 1 for l in self.layers):
            raise AdapterConfigError("layer indices are 1-based block numbers")


def load_adapter_config(path: str | Path | None) -> AdapterConfig:
    cfg = AdapterConfig()
    if path is None:
        cfg.validate()
        return cfg
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise AdapterConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "model_id":
            cfg.model_id = value
        elif key == "layers":
            cfg.layers = tuple(int(v) for v in value.split(","))
        elif key == "input_resolution":
            cfg.input_resolution = int(value)
        elif key == "dataset_root":
            cfg.dataset_root = Path(value)
        elif key == "output_dir":
            cfg.output_dir = Path(value)
        elif key == "batch_size":
            cfg.batch_size = int(value)
        elif key == "write_global":
            cfg.write_global = value.lower() in ("1", "true", "yes")
        else:
            raise AdapterConfigError(f"{path}:{lineno}: unknown key {key!r}")
    cfg.validate()
    return cfg
