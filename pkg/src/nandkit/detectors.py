"""Base anomaly detectors that produce score maps from patch grids.

Two scoring routes share one abstraction:
  - zero-shot text comparison: per-patch softmax of cosine similarity
    against abnormal vs normal text features, layer maps resized to the
    output lattice and summed;
  - feature bank: Euclidean distance to the nearest stored normal patch.

Pre-scored third-party maps enter through the NAAM file format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .embeddings import PatchGridSet, softmax_pair_rows
from .formats import read_map_file, read_projection_file
from .maps import AnomalyMap, resize_bilinear, smooth
from .prompts import TextFeature

__all__ = [
    "Detector",
    "ProjectionSpec",
    "FeatureBank",
    "zs_anomaly_map",
    "build_bank",
    "bank_anomaly_map",
    "score_from_map",
    "load_external_map",
    "ZeroShotTextDetector",
    "FeatureBankDetector",
    "ExternalMapDetector",
]


class Detector(Protocol):
    """Deterministic map producer at a declared output resolution."""

    kind: str

    def score(self, grid_set: PatchGridSet) -> AnomalyMap: ...


@dataclass(frozen=True)
class ProjectionSpec:
    """Per-layer optional affine maps applied to patches before text comparison.

    Entry i is (matrix, offset) with matrix shaped (text_dim, patch_dim), or
    None for identity. Layers beyond the list length are identity. Weights
    are loaded from NAPJ files, never trained here.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray] | None, ...] = ()

    @classmethod
    def identity(cls) -> "ProjectionSpec":
        return cls(layers=())

    @classmethod
    def from_file(cls, path: str | Path) -> "ProjectionSpec":
        return cls(layers=tuple(read_projection_file(path)))

    def apply(self, layer_index: int, patches: np.ndarray) -> np.ndarray:
        """Project an (n, patch_dim) block; identity layers pass through."""
        entry = self.layers[layer_index] if layer_index < len(self.layers) else None
        if entry is None:
            return np.asarray(patches, dtype=np.float64)
        matrix, offset = entry
        patches = np.asarray(patches, dtype=np.float64)
        if patches.shape[1] != matrix.shape[1]:
            raise ValueError(
                f"layer {layer_index}: patch dim {patches.shape[1]} does not match "
                f"projection in_dim {matrix.shape[1]}"
            )
        return patches @ np.asarray(matrix, dtype=np.float64).T + np.asarray(
            offset, dtype=np.float64
        )


def _patch_similarities(patches: np.ndarray, feature: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity of patches against one feature vector."""
    feature = np.asarray(feature, dtype=np.float64)
    fnorm = np.linalg.norm(feature)
    if fnorm == 0.0:
        raise ValueError("zero-norm text feature")
    pnorm = np.linalg.norm(patches, axis=1)
    if np.any(pnorm == 0.0):
        raise ValueError("zero-norm patch embedding")
    return (patches @ feature) / (pnorm * fnorm)


def _layer_text_maps(
    grid_set: PatchGridSet,
    positive: TextFeature,
    f_nor: TextFeature,
    projection: ProjectionSpec,
    out_size: tuple[int, int],
    layers: Sequence[int] | None,
) -> list[np.ndarray]:
    """Per-layer positive-class probability grids resized to out_size."""
    indices = range(len(grid_set.layers)) if layers is None else layers
    indices = list(indices)
    if not indices:
        raise ValueError("no layers selected")
    maps = []
    for idx in indices:
        if idx < 0 or idx >= len(grid_set.layers):
            raise ValueError(f"layer index {idx} out of range")
        layer = grid_set.layers[idx]
        patches = projection.apply(idx, layer.flat().astype(np.float64))
        if patches.shape[1] != positive.vector.size or patches.shape[1] != f_nor.vector.size:
            raise ValueError(
                f"layer {idx}: projected dim {patches.shape[1]} does not match text "
                f"feature dims {positive.vector.size}/{f_nor.vector.size}"
            )
        sim_pos = _patch_similarities(patches, positive.vector)
        sim_nor = _patch_similarities(patches, f_nor.vector)
        probs = softmax_pair_rows(sim_pos, sim_nor).reshape(layer.height, layer.width)
        maps.append(resize_bilinear(probs, out_size[0], out_size[1]))
    return maps


def zs_anomaly_map(
    grid_set: PatchGridSet,
    f_nor: TextFeature,
    f_abn: TextFeature,
    projection: ProjectionSpec | None = None,
    out_size: tuple[int, int] = (256, 256),
    layers: Sequence[int] | None = None,
    sigma: float = 0.0,
) -> AnomalyMap:
    """Zero-shot anomaly map: per-layer abnormal probability, resized, summed.

    Entries lie in [0, L] for L selected layers. Layer maps are resized to
    the common output lattice first because layers have different grid sizes.
    """
    projection = projection or ProjectionSpec.identity()
    layer_maps = _layer_text_maps(grid_set, f_abn, f_nor, projection, out_size, layers)
    total = np.sum(layer_maps, axis=0)
    return AnomalyMap(scores=smooth(total, sigma), origin="zero_shot_text")


@dataclass(frozen=True)
class FeatureBank:
    """Immutable set of normal patch embeddings with nearest-neighbor queries."""

    entries: np.ndarray  # (n, dim) float64
    coreset_fraction: float
    source_count: int

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1:
            raise ValueError("feature bank needs an (n, dim) array with n >= 1")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def nearest_distances(self, queries: np.ndarray) -> np.ndarray:
        """Euclidean distance from each query row to its nearest entry.

        Exact scan, no approximate index; banks at this scale are small.
        """
        queries = np.asarray(queries, dtype=np.float64)
        if queries.shape[1] != self.dim:
            raise ValueError(
                f"query dim {queries.shape[1]} does not match bank dim {self.dim}"
            )
        return cdist(queries, self.entries).min(axis=1)


def greedy_k_center(points: np.ndarray, k: int) -> list[int]:
    """Farthest-point-first subset of row indices; first center is index 0.

    Ties in the farthest-point argmax break toward the lowest index. Both
    choices are frozen: selection is a deterministic function of input order.
    """
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    selected = [0]
    min_dist = np.linalg.norm(points - points[0], axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(min_dist))
        selected.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(points - points[nxt], axis=1))
    return selected


def build_bank(normal_patches: Sequence[np.ndarray] | np.ndarray, coreset_fraction: float) -> FeatureBank:
    """Store normal patches, optionally subsampled by greedy k-center.

    fraction 1.0 keeps every input; fraction f < 1 keeps
    ceil(f * n) greedy k-center representatives.
    """
    if not 0.0 < coreset_fraction <= 1.0:
        raise ValueError(f"coreset fraction must be in (0, 1], got {coreset_fraction}")
    points = np.asarray(
        np.stack([np.asarray(p, dtype=np.float64) for p in normal_patches])
        if not isinstance(normal_patches, np.ndarray)
        else normal_patches,
        dtype=np.float64,
    )
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("normal patch list must be non-empty with one shared dim")
    n = points.shape[0]
    if coreset_fraction >= 1.0:
        entries = points
    else:
        k = int(np.ceil(coreset_fraction * n))
        entries = points[greedy_k_center(points, k)]
    return FeatureBank(entries=entries, coreset_fraction=coreset_fraction, source_count=n)


def bank_anomaly_map(
    grid_set: PatchGridSet,
    bank: FeatureBank,
    layer_index: int = 0,
    out_size: tuple[int, int] = (256, 256),
    sigma: float = 0.0,
) -> AnomalyMap:
    """Nearest-bank-entry distance per patch of one layer, resized to out_size."""
    if layer_index < 0 or layer_index >= len(grid_set.layers):
        raise ValueError(f"layer index {layer_index} out of range")
    layer = grid_set.layers[layer_index]
    if layer.dim != bank.dim:
        raise ValueError(f"layer dim {layer.dim} does not match bank dim {bank.dim}")
    dists = bank.nearest_distances(layer.flat().astype(np.float64))
    grid = dists.reshape(layer.height, layer.width)
    resized = resize_bilinear(grid, out_size[0], out_size[1])
    return AnomalyMap(scores=smooth(resized, sigma), origin="feature_bank")


def score_from_map(amap: AnomalyMap) -> float:
    """Image-level anomaly score: the maximum map entry."""
    return float(amap.scores.max())


def load_external_map(path: str | Path) -> AnomalyMap:
    """Read a pre-scored NAAM map, admitting detectors not implemented here."""
    return AnomalyMap(scores=read_map_file(path).astype(np.float64), origin="external_map_file")


@dataclass(frozen=True)
class ZeroShotTextDetector:
    """Text-feature detector; carries its normal ensemble for reuse downstream."""

    normal_feature: TextFeature
    abnormal_feature: TextFeature
    projection: ProjectionSpec | None = None
    out_size: tuple[int, int] = (256, 256)
    layers: tuple[int, ...] | None = None
    sigma: float = 0.0
    kind: str = "zero_shot_text"

    def score(self, grid_set: PatchGridSet) -> AnomalyMap:
        return zs_anomaly_map(
            grid_set,
            self.normal_feature,
            self.abnormal_feature,
            self.projection,
            self.out_size,
            self.layers,
            self.sigma,
        )


@dataclass(frozen=True)
class FeatureBankDetector:
    bank: FeatureBank
    layer_index: int = 0
    out_size: tuple[int, int] = (256, 256)
    sigma: float = 0.0
    kind: str = "feature_bank"

    def score(self, grid_set: PatchGridSet) -> AnomalyMap:
        return bank_anomaly_map(
            grid_set, self.bank, self.layer_index, self.out_size, self.sigma
        )


@dataclass(frozen=True)
class ExternalMapDetector:
    """Looks up a pre-scored map file per image id under a root directory.

    Files are `<root>/<image_id>.naam` with path separators in the id kept
    as directories.
    """

    root: Path
    kind: str = "external_map_file"

    def map_path(self, image_id: str) -> Path:
        return Path(self.root) / f"{image_id}.naam"

    def score(self, grid_set: PatchGridSet) -> AnomalyMap:
        path = self.map_path(grid_set.image_id)
        if not path.is_file():
            raise FileNotFoundError(f"no external map for {grid_set.image_id!r} at {path}")
        return load_external_map(path)
