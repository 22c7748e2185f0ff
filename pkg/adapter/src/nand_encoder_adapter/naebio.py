"""Standalone writer for the NAEB embedding-grid wire format.

Layout (little-endian, no padding): magic "NAEB", version u16=1, image id as
u16 length + UTF-8 bytes, n_layers u8, per-layer height/width/dim u16,
has_global u8 (+ global dim u16), then row-major f32 payload per layer and
the global vector. The toolkit that consumes these caches owns the reader;
its parser is the conformance oracle for everything written here.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NAEB"
VERSION = 1


def write_naeb(
    path: str | Path,
    image_id: str,
    layers: list[np.ndarray],
    global_vec: np.ndarray | None = None,
) -> None:
    """Write (h, w, dim) float32 layer grids atomically (temp + rename)."""
    if not layers:
        raise ValueError("need at least one layer grid")
    encoded_id = image_id.encode("utf-8")
    if len(encoded_id) > 0xFFFF or len(layers) > 0xFF:
        raise ValueError("image id or layer count out of header range")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<H", len(encoded_id)), encoded_id]
    parts.append(struct.pack("<B", len(layers)))
    grids = []
    for grid in layers:
        grid = np.ascontiguousarray(grid, dtype="<f4")
        if grid.ndim != 3:
            raise ValueError(f"layer grid must be (h, w, dim), got {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("non-finite values in layer grid")
        h, w, dim = grid.shape
        if max(h, w, dim) > 0xFFFF or min(h, w, dim) < 1:
            raise ValueError(f"layer dims out of range: {grid.shape}")
        parts.append(struct.pack("<HHH", h, w, dim))
        grids.append(grid)
    if global_vec is not None:
        global_vec = np.ascontiguousarray(global_vec, dtype="<f4")
        if global_vec.ndim != 1 or not 1 <= global_vec.size <= 0xFFFF:
            raise ValueError(f"bad global vector shape {global_vec.shape}")
        if not np.all(np.isfinite(global_vec)):
            raise ValueError("non-finite values in global vector")
        parts.append(struct.pack("<BH", 1, global_vec.size))
    else:
        parts.append(struct.pack("<B", 0))
    for grid in grids:
        parts.append(grid.tobytes())
    if global_vec is not None:
        parts.append(global_vec.tobytes())

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(target)
