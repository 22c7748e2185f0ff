"""Binary file formats for embeddings, score maps, and projection weights.

All integers and floats are little-endian; payload floats are f32. There is
no padding and no alignment anywhere.

NAEB (embedding grids):
    magic "NAEB" | version u16=1 | image_id (u16 length + UTF-8 bytes)
    | n_layers u8 | per layer: height u16, width u16, dim u16
    | has_global u8 | global dim u16 if has_global
    | payload: per layer in declared order, row-major f32 grid, then the
      global vector.

NAAM (score maps):
    magic "NAAM" | version u16=1 | height u16 | width u16
    | h*w f32 row-major scores (must be >= 0).

NAPJ (per-layer affine projections):
    magic "NAPJ" | version u16=1 | n_layers u8
    | per layer: in_dim u16, out_dim u16, matrix (out x in f32, row-major),
      offset (out f32). in_dim = out_dim = 0 marks an identity layer and
      carries no payload (project-chosen sentinel, dims are >= 1 otherwise).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .embeddings import LayerGrid, PatchGridSet

__all__ = [
    "EmbeddingFileError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedPayloadError",
    "DimensionMismatchError",
    "write_embedding_file",
    "read_embedding_file",
    "write_map_file",
    "read_map_file",
    "write_projection_file",
    "read_projection_file",
]

NAEB_MAGIC = b"NAEB"
NAAM_MAGIC = b"NAAM"
NAPJ_MAGIC = b"NAPJ"
FORMAT_VERSION = 1


class EmbeddingFileError(Exception):
    """Base for all binary format failures."""


class BadMagicError(EmbeddingFileError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(EmbeddingFileError):
    """File declares an unsupported format version."""


class TruncatedPayloadError(EmbeddingFileError):
    """File ends before the header-declared payload is complete."""


class DimensionMismatchError(EmbeddingFileError):
    """Header dimensions are inconsistent with the payload length or invalid."""


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayloadError(
                f"{self.path}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count)

    def expect_magic(self, magic: bytes):
        got = self.take(4) if len(self.data) >= 4 else self.data
        if got != magic:
            raise BadMagicError(f"{self.path}: bad magic {got!r}, expected {magic!r}")

    def expect_version(self):
        version = self.u16()
        if version != FORMAT_VERSION:
            raise VersionMismatchError(
                f"{self.path}: version {version}, supported {FORMAT_VERSION}"
            )

    def done(self):
        if self.pos != len(self.data):
            raise DimensionMismatchError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes beyond "
                "the header-declared payload"
            )


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def write_embedding_file(grid_set: PatchGridSet, path: str | Path) -> None:
    """Serialize a PatchGridSet; read_embedding_file is its bit-exact inverse."""
    image_id = grid_set.image_id.encode("utf-8")
    if len(image_id) > 0xFFFF:
        raise ValueError("image_id longer than 65535 bytes")
    if len(grid_set.layers) > 0xFF:
        raise ValueError("more than 255 layers")
    parts = [NAEB_MAGIC, struct.pack("<H", FORMAT_VERSION)]
    parts.append(struct.pack("<H", len(image_id)))
    parts.append(image_id)
    parts.append(struct.pack("<B", len(grid_set.layers)))
    for layer in grid_set.layers:
        if max(layer.height, layer.width, layer.dim) > 0xFFFF:
            raise ValueError("layer dimension exceeds u16 range")
        parts.append(struct.pack("<HHH", layer.height, layer.width, layer.dim))
    if grid_set.global_vec is not None:
        if grid_set.global_vec.size > 0xFFFF:
            raise ValueError("global dim exceeds u16 range")
        parts.append(struct.pack("<BH", 1, grid_set.global_vec.size))
    else:
        parts.append(struct.pack("<B", 0))
    for layer in grid_set.layers:
        parts.append(_f32_bytes(layer.grid))
    if grid_set.global_vec is not None:
        parts.append(_f32_bytes(grid_set.global_vec))
    Path(path).write_bytes(b"".join(parts))


def read_embedding_file(path: str | Path) -> PatchGridSet:
    data = Path(path).read_bytes()
    r = _Reader(data, str(path))
    r.expect_magic(NAEB_MAGIC)
    r.expect_version()
    image_id = r.take(r.u16()).decode("utf-8")
    n_layers = r.u8()
    if n_layers < 1:
        raise DimensionMismatchError(f"{path}: layer count must be >= 1")
    shapes = []
    for _ in range(n_layers):
        h, w, dim = r.u16(), r.u16(), r.u16()
        if min(h, w, dim) < 1:
            raise DimensionMismatchError(f"{path}: layer dims must be >= 1, got {(h, w, dim)}")
        shapes.append((h, w, dim))
    has_global = r.u8()
    if has_global not in (0, 1):
        raise DimensionMismatchError(f"{path}: has_global flag must be 0 or 1")
    global_dim = None
    if has_global == 1:
        global_dim = r.u16()
        if global_dim < 1:
            raise DimensionMismatchError(f"{path}: global dim must be >= 1")
    layers = []
    for h, w, dim in shapes:
        values = r.f32_array(h * w * dim)
        if not np.all(np.isfinite(values)):
            raise EmbeddingFileError(f"{path}: non-finite values in layer payload")
        layers.append(LayerGrid(h, w, dim, values.reshape(h, w, dim).copy()))
    global_vec = None
    if global_dim is not None:
        gv = r.f32_array(global_dim)
        if not np.all(np.isfinite(gv)):
            raise EmbeddingFileError(f"{path}: non-finite values in global vector")
        global_vec = gv.copy()
    r.done()
    return PatchGridSet(image_id=image_id, layers=tuple(layers), global_vec=global_vec)


def write_map_file(scores: np.ndarray, path: str | Path) -> None:
    """Serialize a 2-D nonnegative score grid in the NAAM format."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValueError(f"map must be 2-D, got shape {scores.shape}")
    if scores.shape[0] > 0xFFFF or scores.shape[1] > 0xFFFF:
        raise ValueError("map dimension exceeds u16 range")
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise ValueError("map scores must be finite and >= 0")
    h, w = scores.shape
    payload = NAAM_MAGIC + struct.pack("<HHH", FORMAT_VERSION, h, w) + _f32_bytes(scores)
    Path(path).write_bytes(payload)


def read_map_file(path: str | Path) -> np.ndarray:
    """Parse a NAAM file into an (h, w) float32 array of scores."""
    data = Path(path).read_bytes()
    r = _Reader(data, str(path))
    r.expect_magic(NAAM_MAGIC)
    r.expect_version()
    h, w = r.u16(), r.u16()
    if h < 1 or w < 1:
        raise DimensionMismatchError(f"{path}: map dims must be >= 1, got {(h, w)}")
    values = r.f32_array(h * w)
    r.done()
    if not np.all(np.isfinite(values)):
        raise EmbeddingFileError(f"{path}: non-finite map scores")
    if np.any(values < 0):
        raise EmbeddingFileError(f"{path}: negative map scores")
    return values.reshape(h, w).copy()


def write_projection_file(
    layers: list[tuple[np.ndarray, np.ndarray] | None], path: str | Path
) -> None:
    """Serialize per-layer (matrix, offset) affine maps; None marks identity."""
    if len(layers) > 0xFF:
        raise ValueError("more than 255 projection layers")
    parts = [NAPJ_MAGIC, struct.pack("<HB", FORMAT_VERSION, len(layers))]
    for entry in layers:
        if entry is None:
            parts.append(struct.pack("<HH", 0, 0))
            continue
        matrix, offset = entry
        matrix = np.asarray(matrix)
        offset = np.asarray(offset)
        if matrix.ndim != 2 or offset.ndim != 1 or offset.size != matrix.shape[0]:
            raise ValueError(
                f"projection needs (out x in) matrix and (out,) offset, got "
                f"{matrix.shape} and {offset.shape}"
            )
        out_dim, in_dim = matrix.shape
        if max(in_dim, out_dim) > 0xFFFF or min(in_dim, out_dim) < 1:
            raise ValueError("projection dims out of u16 range")
        parts.append(struct.pack("<HH", in_dim, out_dim))
        parts.append(_f32_bytes(matrix))
        parts.append(_f32_bytes(offset))
    Path(path).write_bytes(b"".join(parts))


def read_projection_file(path: str | Path) -> list[tuple[np.ndarray, np.ndarray] | None]:
    data = Path(path).read_bytes()
    r = _Reader(data, str(path))
    r.expect_magic(NAPJ_MAGIC)
    r.expect_version()
    n_layers = r.u8()
    layers: list[tuple[np.ndarray, np.ndarray] | None] = []
    for _ in range(n_layers):
        in_dim, out_dim = r.u16(), r.u16()
        if in_dim == 0 and out_dim == 0:
            layers.append(None)
            continue
        if in_dim == 0 or out_dim == 0:
            raise DimensionMismatchError(
                f"{path}: projection dims must both be 0 (identity) or both >= 1"
            )
        matrix = r.f32_array(out_dim * in_dim).reshape(out_dim, in_dim).copy()
        offset = r.f32_array(out_dim).copy()
        if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(offset))):
            raise EmbeddingFileError(f"{path}: non-finite projection weights")
        layers.append((matrix, offset))
    r.done()
    return layers
