"""Batch extraction of patch-grid and prompt embedding caches.

One NAEB file per image under <output_dir>/embeddings/<ref>.naeb, plus a
metadata sidecar recording the model identifier, preprocessing constants,
and exported layers, so a cache can be audited later. Unreadable images are
skipped with a log line; shape mismatches abort (they indicate a config
error, not a data problem).
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import AdapterConfig
from .model import CLIP_MEAN, CLIP_STD, EncoderBundle, load_encoder
from .naebio import write_naeb

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def discover_images(root: Path) -> list[str]:
    """Relative refs of every image under the dataset root, sorted."""
    root = Path(root)
    refs = [
        str(p.relative_to(root))
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(refs)


def _grids_from_hidden(
    hidden: torch.Tensor, grid_size: int, hidden_dim: int
) -> np.ndarray:
    """(B, 1 + g*g, dim) transformer tokens -> (B, g, g, dim) patch grids."""
    b, n_tokens, dim = hidden.shape
    if n_tokens != 1 + grid_size * grid_size or dim != hidden_dim:
        raise RuntimeError(
            f"unexpected token shape {tuple(hidden.shape)} for grid {grid_size}"
        )
    patches = hidden[:, 1:, :]  # drop the class token
    return (
        patches.reshape(b, grid_size, grid_size, dim).to(torch.float32).cpu().numpy()
    )


def extract_images(config: AdapterConfig, bundle: EncoderBundle | None = None) -> list[Path]:
    """Encode every dataset image; returns the written file paths."""
    config.validate()
    bundle = bundle or load_encoder(config.model_id, config.input_resolution)
    n_blocks = int(bundle.model.config.vision_config.num_hidden_layers)
    bad = [l for l in config.layers if l > n_blocks]
    if bad:
        raise RuntimeError(f"layer indices {bad} exceed the model's {n_blocks} blocks")
    refs = discover_images(config.dataset_root)
    if not refs:
        raise RuntimeError(f"no images under {config.dataset_root}")
    written: list[Path] = []
    for start in range(0, len(refs), config.batch_size):
        batch_refs = refs[start : start + config.batch_size]
        kept_refs: list[str] = []
        images: list[Image.Image] = []
        for ref in batch_refs:
            try:
                with Image.open(Path(config.dataset_root) / ref) as img:
                    images.append(img.convert("RGB"))
                    kept_refs.append(ref)
            except Exception as exc:
                log.warning("skipping unreadable image %s (%s)", ref, exc)
        if not images:
            continue
        pixel_values = bundle.image_batch(images)
        hidden_states = bundle.vision_hidden_states(pixel_values)
        layer_grids = [
            _grids_from_hidden(hidden_states[l], bundle.grid_size, bundle.hidden_dim)
            for l in config.layers
        ]
        globals_ = (
            bundle.image_features(pixel_values).to(torch.float32).cpu().numpy()
            if config.write_global
            else None
        )
        for i, ref in enumerate(kept_refs):
            target = Path(config.output_dir) / "embeddings" / f"{ref}.naeb"
            write_naeb(
                target,
                image_id=ref,
                layers=[g[i] for g in layer_grids],
                global_vec=globals_[i] if globals_ is not None else None,
            )
            written.append(target)
    _write_metadata(config, bundle)
    return written


def extract_prompts(
    prompts: list[str], config: AdapterConfig, bundle: EncoderBundle | None = None
) -> Path:
    """One embedding per prompt, order preserved, as a (n, 1, dim) NAEB grid."""
    if not prompts:
        raise ValueError("prompt list must be non-empty")
    config.validate()
    bundle = bundle or load_encoder(config.model_id, config.input_resolution)
    features = bundle.text_features(list(prompts)).to(torch.float32).cpu().numpy()
    target = Path(config.output_dir) / "prompts.naeb"
    write_naeb(
        target,
        image_id="prompts",
        layers=[features.reshape(len(prompts), 1, features.shape[1])],
    )
    listing = Path(config.output_dir) / "prompts.txt"
    tmp = listing.with_suffix(".txt.tmp")
    tmp.write_text("\n".join(prompts) + "\n", encoding="utf-8")
    tmp.replace(listing)
    return target


def _write_metadata(config: AdapterConfig, bundle: EncoderBundle) -> None:
    lines = [
        f"model_id = {bundle.model_id}",
        f"input_resolution = {config.input_resolution}",
        f"layers = {','.join(str(l) for l in config.layers)}",
        f"grid_size = {bundle.grid_size}",
        f"hidden_dim = {bundle.hidden_dim}",
        f"normalize_mean = {','.join(f'{v:.8f}' for v in CLIP_MEAN)}",
        f"normalize_std = {','.join(f'{v:.8f}' for v in CLIP_STD)}",
        "resize = bicubic",
    ]
    target = Path(config.output_dir) / "extraction.meta.txt"
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(".txt.tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(target)
