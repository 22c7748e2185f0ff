import numpy as np
import pytest

from nandkit.synth import build_fixture


def make_tree(root, spec):
    """Create an MVTec-style directory tree of empty image files.

    spec: {class: {"train": n, "test": {type: n}}}
    """
    for cls, parts in spec.items():
        for i in range(parts.get("train", 0)):
            p = root / cls / "train" / "good" / f"{i:03d}.png"
            p.parent.mkdir(parents=True, exist_ok=True)
            p.touch()
        for anomaly_type, n in parts["test"].items():
            d = root / cls / "test" / anomaly_type
            d.mkdir(parents=True, exist_ok=True)
            for i in range(n):
                (d / f"{i:03d}.png").touch()
    return root


@pytest.fixture()
def mvtec_like_tree(tmp_path):
    return make_tree(
        tmp_path / "data",
        {
            "carpet": {"train": 2, "test": {"good": 3, "thread": 2, "hole": 2}},
            "toothbrush": {"train": 1, "test": {"good": 2, "defective": 2}},
            "cable": {
                "train": 1,
                "test": {"good": 2, "bent_wire": 2, "cable_swap": 2, "combined": 1},
            },
        },
    )


@pytest.fixture(scope="session")
def planted(tmp_path_factory):
    """Synthetic planted fixture shared across tests: (index, fixture, manifest)."""
    base = tmp_path_factory.mktemp("fixture")
    index, fixture, manifest = build_fixture(base / "data", base / "cache", seed=42)
    return index, fixture, manifest, base / "cache"


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
