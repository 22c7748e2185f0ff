"""Synthetic planted-normality fixture.

Builds an MVTec-style tree for one class with two anomaly groups whose
defect regions are biased toward distinct text-feature directions, plus the
matching embedding cache. Every patch carries a shared "material" component
so normal patches cluster (the feature bank route separates too), and both
defect kinds also lean toward the abnormal ensemble so the base zero-shot
detector flags them before any normality is added.

All randomness flows through the stub encoder, so the whole fixture is a
pure function of the seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .cache import CacheManifest, ingest
from .embeddings import RegionBias, StubEncoder
from .evalbench import DatasetIndex, index_dataset
from .nand import make_spec
from .prompts import build_text_feature, default_states, default_templates

__all__ = ["SyntheticFixture", "planted_encoder", "build_fixture"]

CLASS_NAME = "widget"
GROUPS = ("scuff", "dent")
DIM = 256
LAYOUT = ((16, 16, DIM), (8, 8, DIM))
MATERIAL_STRENGTH = 2.0
DEFECT_STRENGTH = 6.0
# fraction of the defect direction pointing along the abnormal ensemble;
# group 1 leads group 2 so suppressing it visibly flips the ranking
ABNORMAL_MIX = {GROUPS[0]: 0.75, GROUPS[1]: 0.60}
COUNTS = {"train": 8, "good": 6, GROUPS[0]: 16, GROUPS[1]: 14}
REGIONS = (
    (0.15, 0.15, 0.40, 0.40),
    (0.15, 0.55, 0.40, 0.85),
    (0.55, 0.15, 0.85, 0.40),
    (0.50, 0.50, 0.80, 0.80),
)
IMAGE_SIZE = 64
GROUP_COLORS = {GROUPS[0]: (208, 82, 82), GROUPS[1]: (82, 96, 208)}


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _image_index(ref: str) -> int:
    return int(Path(ref).stem)


def defect_region(ref: str) -> tuple[float, float, float, float]:
    return REGIONS[_image_index(ref) % len(REGIONS)]


@dataclass(frozen=True)
class SyntheticFixture:
    seed: int
    class_name: str
    groups: tuple[str, str]
    encoder: StubEncoder  # planted: use for images
    text_encoder: StubEncoder  # unplanted: use for prompts


def planted_encoder(seed: int = 42, class_name: str = CLASS_NAME) -> SyntheticFixture:
    """Stub encoder whose test images carry planted defect regions.

    The planted directions are derived from the same prompt pipeline that
    normality addition uses, so adding the group name as a normality finds
    exactly the planted pattern.
    """
    text_encoder = StubEncoder(seed=seed, layout=LAYOUT, text_dim=DIM)
    templates = default_templates()
    f_abn = build_text_feature(
        default_states(class_name, "abnormal"), "abnormal", text_encoder, templates
    )
    u_abn = _unit(f_abn.vector)
    u_mat = text_encoder.encode_text(f"material\x1f{class_name}").astype(np.float64)
    biases = {}
    for group in GROUPS:
        spec = make_spec(class_name, group)
        f_add = build_text_feature(spec.phrases, "addition", text_encoder, templates)
        mix = ABNORMAL_MIX[group]
        direction = _unit(mix * u_abn + np.sqrt(1.0 - mix * mix) * _unit(f_add.vector))
        biases[group] = DEFECT_STRENGTH * direction

    material = RegionBias(0.0, 0.0, 1.0, 1.0, MATERIAL_STRENGTH * u_mat)

    def bias_provider(ref: str) -> list[RegionBias]:
        regions = [material]
        for group, bias in biases.items():
            if f"/test/{group}/" in ref:
                regions.append(RegionBias(*defect_region(ref), bias=bias))
        return regions

    encoder = StubEncoder(
        seed=seed, layout=LAYOUT, text_dim=DIM, bias_provider=bias_provider
    )
    return SyntheticFixture(
        seed=seed,
        class_name=class_name,
        groups=GROUPS,
        encoder=encoder,
        text_encoder=text_encoder,
    )


def _render_image(ref: str, seed: int, group: str | None) -> Image.Image:
    """Small deterministic PNG; defect images get a mark where the bias is."""
    digest = hashlib.blake2b(f"png\x1f{ref}\x1f{seed}".encode(), digest_size=8).digest()
    rng = np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))
    base = rng.integers(96, 160, size=(IMAGE_SIZE, IMAGE_SIZE, 1), dtype=np.uint8)
    noise = rng.integers(0, 24, size=(IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    img = Image.fromarray(np.clip(base + noise, 0, 255).astype(np.uint8), "RGB")
    if group is not None:
        r0, c0, r1, c1 = defect_region(ref)
        draw = ImageDraw.Draw(img)
        draw.rectangle(
            (int(c0 * IMAGE_SIZE), int(r0 * IMAGE_SIZE), int(c1 * IMAGE_SIZE) - 1, int(r1 * IMAGE_SIZE) - 1),
            fill=GROUP_COLORS.get(group, (200, 200, 80)),
        )
    return img


def build_fixture(
    dataset_root: str | Path,
    cache_dir: str | Path | None = None,
    seed: int = 42,
) -> tuple[DatasetIndex, SyntheticFixture, CacheManifest | None]:
    """Write the synthetic tree (and optionally its planted embedding cache)."""
    root = Path(dataset_root)
    fixture = planted_encoder(seed=seed)
    cls = fixture.class_name
    refs: list[tuple[str, str | None]] = []
    for i in range(COUNTS["train"]):
        refs.append((f"{cls}/train/good/{i:03d}.png", None))
    for i in range(COUNTS["good"]):
        refs.append((f"{cls}/test/good/{i:03d}.png", None))
    for group in GROUPS:
        for i in range(COUNTS[group]):
            refs.append((f"{cls}/test/{group}/{i:03d}.png", group))
    for ref, group in refs:
        path = root / ref
        path.parent.mkdir(parents=True, exist_ok=True)
        _render_image(ref, seed, group).save(path, format="PNG")
    index = index_dataset(root)
    manifest = None
    if cache_dir is not None:
        manifest, _ = ingest(index, fixture.encoder, Path(cache_dir))
    return index, fixture, manifest
