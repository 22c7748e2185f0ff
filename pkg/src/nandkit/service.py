"""HTTP service backing the normality editor UI.

All responses are derived from immutable snapshots: the dataset index and
caches load at startup, detectors memoize lazily, and nothing here writes to
the cache. Map previews are rendered as lossless 8-bit grayscale PNGs plus
the raw min/max so clients can recolor without losing precision.
"""

from __future__ import annotations

import base64
import io
import os
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image
from pydantic import BaseModel

from .cache import CacheError, cache_lock
from .config import Config
from .evalbench import DatasetError, ScenarioError
from .pipeline import Workbench

__all__ = ["create_app", "map_payload"]


def map_payload(values: np.ndarray) -> dict:
    """Lossless-for-display encoding of a score grid.

    The PNG holds levels round((v - min) / (max - min) * 255); min/max let a
    client recover approximate scores or recolor bijectively on the 256
    levels.
    """
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if hi > lo:
        levels = np.round((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        levels = np.zeros(values.shape, dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(levels, mode="L").save(buf, format="PNG")
    return {
        "png_base64": base64.b64encode(buf.getvalue()).decode("ascii"),
        "min": lo,
        "max": hi,
        "height": int(values.shape[0]),
        "width": int(values.shape[1]),
    }


class PreviewRequest(BaseModel):
    class_name: str
    image_id: str
    normality_text: str
    detector: str | None = None

    model_config = {"populate_by_name": True}

    def __init__(self, **data):
        # accept "class" as the wire name
        if "class" in data:
            data.setdefault("class_name", data.pop("class"))
        super().__init__(**data)


class EvaluateRequest(BaseModel):
    class_name: str
    group: str
    detector: str | None = None

    def __init__(self, **data):
        if "class" in data:
            data.setdefault("class_name", data.pop("class"))
        super().__init__(**data)


def create_app(config: Config, frontend_dir: str | Path | None = None) -> FastAPI:
    with cache_lock(Path(config.cache_dir), exclusive=False):
        bench = Workbench(config)
    build_lock = threading.Lock()
    app = FastAPI(title="nandkit service")

    def check_class(class_name: str) -> None:
        if class_name not in bench.index.classes:
            raise HTTPException(status_code=404, detail=f"unknown class {class_name!r}")

    @app.get("/api/health")
    def health():
        return {"status": "ok", "classes": len(bench.index.classes)}

    @app.get("/api/classes")
    def classes():
        return {"classes": list(bench.index.classes)}

    @app.get("/api/classes/{class_name}/groups")
    def groups(class_name: str):
        check_class(class_name)
        return {
            "class": class_name,
            "groups": {g: list(t) for g, t in bench.index.groups(class_name).items()},
        }

    @app.get("/api/classes/{class_name}/images")
    def images(class_name: str, split: str = "test"):
        check_class(class_name)
        if split == "test":
            items = [
                {"id": img.ref, "anomaly_type": img.anomaly_type}
                for img in bench.index.test_images[class_name]
            ]
        elif split == "train":
            items = [
                {"id": ref, "anomaly_type": "good"}
                for ref in bench.index.train_refs[class_name]
            ]
        else:
            raise HTTPException(status_code=400, detail=f"unknown split {split!r}")
        return {"class": class_name, "split": split, "images": items}

    @app.get("/api/images/{class_name}/{rest:path}")
    def image_bytes(class_name: str, rest: str):
        check_class(class_name)
        path = bench.index.image_path(f"{class_name}/{rest}")
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"no image {class_name}/{rest}")
        return FileResponse(path)

    @app.post("/api/preview")
    def preview(req: PreviewRequest):
        check_class(req.class_name)
        if not req.normality_text.strip():
            raise HTTPException(status_code=400, detail="normality_text must be non-empty")
        known = {img.ref for img in bench.index.test_images[req.class_name]}
        known.update(bench.index.train_refs[req.class_name])
        if req.image_id not in known:
            raise HTTPException(status_code=404, detail=f"unknown image {req.image_id!r}")
        try:
            with build_lock:
                result = bench.preview(
                    req.class_name, req.image_id, req.normality_text, req.detector
                )
        except CacheError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JSONResponse(
            {
                "image": result["image"],
                "normality_text": result["normality_text"],
                "detector": result["detector"],
                "score_before": result["score_before"],
                "score_after": result["score_after"],
                "map_before": map_payload(result["map_before"]),
                "map_sup": map_payload(result["map_sup"]),
                "map_after": map_payload(result["map_after"]),
            }
        )

    @app.post("/api/evaluate")
    def evaluate(req: EvaluateRequest):
        check_class(req.class_name)
        if req.group not in bench.index.groups(req.class_name):
            raise HTTPException(status_code=404, detail=f"unknown group {req.group!r}")
        try:
            with build_lock:
                report = bench.evaluate_group(req.class_name, req.group, req.detector)
        except ScenarioError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (CacheError, DatasetError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JSONResponse(report.to_dict())

    frontend = frontend_dir or os.environ.get("NAND_FRONTEND_DIR")
    if frontend and Path(frontend).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="ui")

    return app
