"""Embedding vectors, patch grids, similarity primitives, and the stub encoder.

Embeddings are 1-D float32 numpy arrays. All similarity and softmax arithmetic
runs in float64 regardless of storage precision.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

__all__ = [
    "as_embedding",
    "cosine_similarity",
    "softmax_over",
    "softmax_pair_rows",
    "LayerGrid",
    "PatchGridSet",
    "RegionBias",
    "EncoderClient",
    "StubEncoder",
    "stub_encode",
]


def as_embedding(values, dim: int | None = None) -> np.ndarray:
    """Validate and coerce to a float32 embedding vector.

    Rejects empty, non-1-D, and non-finite inputs. If `dim` is given the
    length must match it.
    """
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError("embedding must have length >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding contains non-finite values")
    if dim is not None and arr.size != dim:
        raise ValueError(f"embedding has dim {arr.size}, expected {dim}")
    return arr


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two embeddings, in [-1, 1].

    Dimension mismatches and zero-norm inputs raise ValueError: both indicate
    caller bugs, not data conditions.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm embedding in cosine_similarity")
    sim = float(np.dot(a, b) / (na * nb))
    # guard against rounding pushing past the analytic bound
    return min(1.0, max(-1.0, sim))


def softmax_over(g: np.ndarray, features: Sequence[np.ndarray]) -> np.ndarray:
    """Softmax of cosine similarities between `g` and each feature.

    Returns a probability vector (float64) of the same length as `features`.
    Uses the max-shift trick before exponentiation.
    """
    if len(features) == 0:
        raise ValueError("softmax_over requires a non-empty feature list")
    sims = np.array([cosine_similarity(g, f) for f in features], dtype=np.float64)
    shifted = sims - sims.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def softmax_pair_rows(sim_a: np.ndarray, sim_b: np.ndarray) -> np.ndarray:
    """Vectorized first-entry softmax over feature pairs.

    For row-wise similarity arrays against two features, returns
    exp(sim_a) / (exp(sim_a) + exp(sim_b)) computed with the same max-shift
    as softmax_over. Used by the map builders; softmax_over stays the
    definitional scalar form.
    """
    sim_a = np.asarray(sim_a, dtype=np.float64)
    sim_b = np.asarray(sim_b, dtype=np.float64)
    m = np.maximum(sim_a, sim_b)
    ea = np.exp(sim_a - m)
    eb = np.exp(sim_b - m)
    return ea / (ea + eb)


@dataclass(frozen=True)
class LayerGrid:
    """One layer's height x width grid of patch embeddings."""

    height: int
    width: int
    dim: int
    grid: np.ndarray  # (height, width, dim) float32

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float32)
        if g.shape != (self.height, self.width, self.dim):
            raise ValueError(
                f"grid shape {g.shape} does not match declared "
                f"({self.height}, {self.width}, {self.dim})"
            )
        if self.height < 1 or self.width < 1 or self.dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if not np.all(np.isfinite(g)):
            raise ValueError("layer grid contains non-finite values")
        object.__setattr__(self, "grid", g)

    def flat(self) -> np.ndarray:
        """Patches as an (height*width, dim) array."""
        return self.grid.reshape(-1, self.dim)


@dataclass(frozen=True)
class PatchGridSet:
    """Per-image, per-layer patch embedding grids plus an optional global vector."""

    image_id: str
    layers: tuple[LayerGrid, ...]
    global_vec: np.ndarray | None = None

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("PatchGridSet needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.global_vec is not None:
            object.__setattr__(self, "global_vec", as_embedding(self.global_vec))


@dataclass(frozen=True)
class RegionBias:
    """A rectangular patch region to bias toward a direction.

    Coordinates are fractions of the grid in [0, 1]; a patch belongs to the
    region when its cell center falls inside [row0, row1) x [col0, col1).
    The same fractional region applies to every layer (or only `layer` if
    set), so a planted "defect" lands at the same image location across
    layers of different grid sizes.
    """

    row0: float
    col0: float
    row1: float
    col1: float
    bias: np.ndarray
    layer: int | None = None

    def rows_cols(self, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
        r_centers = (np.arange(height) + 0.5) / height
        c_centers = (np.arange(width) + 0.5) / width
        rows = np.nonzero((r_centers >= self.row0) & (r_centers < self.row1))[0]
        cols = np.nonzero((c_centers >= self.col0) & (c_centers < self.col1))[0]
        return rows, cols


class EncoderClient(Protocol):
    """Resolves image references to patch grids and prompt text to embeddings.

    Implementations must be deterministic: same input and configuration give
    bit-identical output.
    """

    def encode_image(self, image_ref: str) -> PatchGridSet: ...

    def encode_text(self, prompt: str) -> np.ndarray: ...


# Frozen stub PRNG construction (golden files depend on it, do not change):
# key = first 8 bytes (little-endian u64) of
#       blake2b("<image_id>\x1f<seed>\x1f<layer>\x1f<row>\x1f<col>")
# stream = np.random.Philox(key=key) -> Generator.standard_normal(dim) in
# float64, normalized to unit length, then cast to float32.
# Text prompts use the key string "text\x1f<prompt>\x1f<seed>".


def _philox_unit(key_text: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(key_text.encode("utf-8"), digest_size=8).digest()
    key = int.from_bytes(digest, "little")
    gen = np.random.Generator(np.random.Philox(key=key))
    v = gen.standard_normal(dim)
    n = np.linalg.norm(v)
    while n == 0.0:  # astronomically unlikely; redraw keeps the contract total
        v = gen.standard_normal(dim)
        n = np.linalg.norm(v)
    return v / n


def stub_encode(
    image_id: str,
    seed: int,
    layout: Sequence[tuple[int, int, int]],
    regions: Sequence[RegionBias] = (),
) -> PatchGridSet:
    """Deterministic pseudo-random patch grids for tests and fixtures.

    Every patch is a unit-norm vector derived only from
    (image_id, seed, layer, row, col). Patches inside a RegionBias become the
    renormalized sum of the random vector and the bias, which lets tests plant
    defect-like regions aligned with chosen text features.
    """
    if len(layout) == 0:
        raise ValueError("stub_encode requires a non-empty layout")
    layers = []
    for layer_idx, (h, w, dim) in enumerate(layout):
        grid = np.empty((h, w, dim), dtype=np.float64)
        for r in range(h):
            for c in range(w):
                grid[r, c] = _philox_unit(
                    f"{image_id}\x1f{seed}\x1f{layer_idx}\x1f{r}\x1f{c}", dim
                )
        for region in regions:
            if region.layer is not None and region.layer != layer_idx:
                continue
            bias = np.asarray(region.bias, dtype=np.float64)
            if bias.shape != (dim,):
                raise ValueError(
                    f"region bias dim {bias.shape} does not match layer dim {dim}"
                )
            rows, cols = region.rows_cols(h, w)
            for r in rows:
                for c in cols:
                    v = grid[r, c] + bias
                    n = np.linalg.norm(v)
                    if n == 0.0:
                        raise ValueError("bias cancels patch vector exactly")
                    grid[r, c] = v / n
        layers.append(LayerGrid(h, w, dim, grid.astype(np.float32)))
    return PatchGridSet(image_id=image_id, layers=tuple(layers))


@dataclass
class StubEncoder:
    """EncoderClient backed by stub_encode; pure function of its arguments.

    `bias_provider` maps an image reference to the regions to plant in it,
    used by synthetic fixtures. Text embeddings are unit vectors keyed by
    (prompt, seed).
    """

    seed: int
    layout: tuple[tuple[int, int, int], ...]
    text_dim: int = 256
    bias_provider: Callable[[str], Sequence[RegionBias]] | None = field(default=None)

    def encode_image(self, image_ref: str) -> PatchGridSet:
        regions = self.bias_provider(image_ref) if self.bias_provider else ()
        return stub_encode(image_ref, self.seed, self.layout, regions)

    def encode_text(self, prompt: str) -> np.ndarray:
        v = _philox_unit(f"text\x1f{prompt}\x1f{self.seed}", self.text_dim)
        return v.astype(np.float32)
