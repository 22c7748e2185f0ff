"""Embedding cache: one NAEB file per image, a hash manifest, and the
single-writer/multi-reader lock discipline.

Writers (ingest, bank building) hold the lock exclusively; readers (eval,
serve) hold it shared while loading. Manifest hashes verify on load and
stale or corrupted entries are rebuilt by the next ingest.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detectors import FeatureBank, build_bank
from .embeddings import EncoderClient, PatchGridSet
from .evalbench import DatasetIndex
from .formats import read_embedding_file, write_embedding_file

__all__ = [
    "CacheManifest",
    "CacheError",
    "cache_lock",
    "embedding_path",
    "ingest",
    "CachedEncoder",
    "save_bank",
    "load_bank",
]

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class CacheError(Exception):
    pass


@contextmanager
def cache_lock(cache_dir: Path, exclusive: bool):
    cache_dir.mkdir(parents=True, exist_ok=True)
    lock_path = cache_dir / ".lock"
    fd = os.open(lock_path, os.O_RDWR | os.O_CREAT, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class CacheManifest:
    images: dict[str, dict] = field(default_factory=dict)  # ref -> {path, sha256}
    banks: dict[str, dict] = field(default_factory=dict)  # class -> {path, sha256, ...}

    @classmethod
    def load(cls, cache_dir: Path) -> "CacheManifest":
        path = Path(cache_dir) / MANIFEST_NAME
        if not path.is_file():
            return cls()
        raw = json.loads(path.read_text(encoding="utf-8"))
        return cls(images=raw.get("images", {}), banks=raw.get("banks", {}))

    def save(self, cache_dir: Path) -> None:
        path = Path(cache_dir) / MANIFEST_NAME
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps({"images": self.images, "banks": self.banks}, indent=1, sort_keys=True),
            encoding="utf-8",
        )
        tmp.replace(path)


def embedding_path(cache_dir: Path, ref: str) -> Path:
    return Path(cache_dir) / "embeddings" / f"{ref}.naeb"


def ingest(
    index: DatasetIndex,
    encoder: EncoderClient,
    cache_dir: Path,
    force: bool = False,
) -> tuple[CacheManifest, int]:
    """Encode every indexed image whose cache entry is missing or stale.

    Returns the manifest and the number of files (re)encoded. Idempotent:
    a second run with unchanged inputs encodes nothing.
    """
    cache_dir = Path(cache_dir)
    with cache_lock(cache_dir, exclusive=True):
        manifest = CacheManifest.load(cache_dir)
        refs: list[str] = []
        for cls in index.classes:
            refs.extend(index.train_refs[cls])
            refs.extend(img.ref for img in index.test_images[cls])
        encoded = 0
        for ref in refs:
            target = embedding_path(cache_dir, ref)
            entry = manifest.images.get(ref)
            if not force and entry is not None and target.is_file():
                if _sha256(target) == entry["sha256"]:
                    continue
                log.warning("cache entry for %s failed hash check; rebuilding", ref)
            target.parent.mkdir(parents=True, exist_ok=True)
            grid_set = encoder.encode_image(ref)
            tmp = target.with_suffix(".naeb.tmp")
            write_embedding_file(grid_set, tmp)
            tmp.replace(target)
            manifest.images[ref] = {
                "path": str(target.relative_to(cache_dir)),
                "sha256": _sha256(target),
            }
            encoded += 1
        manifest.save(cache_dir)
    return manifest, encoded


@dataclass
class CachedEncoder:
    """EncoderClient whose image half reads verified NAEB files.

    Text prompts delegate to `text_encoder`; image loads check the manifest
    hash and refuse corrupted files rather than silently serving them.
    """

    cache_dir: Path
    text_encoder: EncoderClient
    manifest: CacheManifest | None = None
    verify: bool = True

    def __post_init__(self):
        self.cache_dir = Path(self.cache_dir)
        if self.manifest is None:
            self.manifest = CacheManifest.load(self.cache_dir)

    def encode_image(self, image_ref: str) -> PatchGridSet:
        path = embedding_path(self.cache_dir, image_ref)
        if not path.is_file():
            raise CacheError(f"no cached embedding for {image_ref!r}; run ingest")
        if self.verify:
            entry = self.manifest.images.get(image_ref)
            if entry is None:
                raise CacheError(f"{image_ref!r} missing from the cache manifest; run ingest")
            if _sha256(path) != entry["sha256"]:
                raise CacheError(f"cached embedding for {image_ref!r} failed its hash check")
        return read_embedding_file(path)

    def encode_text(self, prompt: str) -> np.ndarray:
        return self.text_encoder.encode_text(prompt)


def save_bank(
    bank: FeatureBank, cache_dir: Path, class_name: str, layer_index: int
) -> dict:
    """Persist a bank under the cache and record it in the manifest."""
    cache_dir = Path(cache_dir)
    path = cache_dir / "banks" / f"{class_name}.npz"
    with cache_lock(cache_dir, exclusive=True):
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".npz.tmp")
        with open(tmp, "wb") as fh:
            np.savez(
                fh,
                entries=bank.entries,
                coreset_fraction=bank.coreset_fraction,
                source_count=bank.source_count,
                layer_index=layer_index,
            )
        tmp.replace(path)
        entry = {
            "path": str(path.relative_to(cache_dir)),
            "sha256": _sha256(path),
            "coreset_fraction": bank.coreset_fraction,
            "layer_index": layer_index,
        }
        manifest = CacheManifest.load(cache_dir)
        manifest.banks[class_name] = entry
        manifest.save(cache_dir)
    return entry


def load_bank(cache_dir: Path, class_name: str) -> tuple[FeatureBank, int]:
    cache_dir = Path(cache_dir)
    manifest = CacheManifest.load(cache_dir)
    entry = manifest.banks.get(class_name)
    if entry is None:
        raise CacheError(f"no bank for class {class_name!r}; run build-bank")
    path = cache_dir / entry["path"]
    if not path.is_file() or _sha256(path) != entry["sha256"]:
        raise CacheError(f"bank file for {class_name!r} is missing or corrupted")
    with np.load(path) as data:
        bank = FeatureBank(
            entries=data["entries"],
            coreset_fraction=float(data["coreset_fraction"]),
            source_count=int(data["source_count"]),
        )
        layer_index = int(data["layer_index"])
    return bank, layer_index
