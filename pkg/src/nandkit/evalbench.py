"""Normality-addition evaluation protocol.

A scenario relabels one anomaly group of one class as normal (y=0) and keeps
every other anomaly type abnormal (y=1). Image-level AUROC before and after
adding that normality to a detector quantifies how well the addition worked.

Exclusions baked into scenario construction: "combined" images (they span
all anomaly types of their class) are removed outright, and scenarios whose
relabeling leaves no abnormal image fail with an "all-normal test set" error
(this is what kills the toothbrush class, whose only type is "defective").
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .detectors import Detector, score_from_map
from .embeddings import EncoderClient

__all__ = [
    "DatasetError",
    "ScenarioError",
    "AllNormalError",
    "AllAbnormalError",
    "DatasetIndex",
    "Scenario",
    "EvalReport",
    "ReportSummary",
    "load_group_table",
    "index_dataset",
    "build_scenario",
    "auroc",
    "run_before_after",
    "aggregate_report",
    "format_cell",
]

GOOD = "good"
COMBINED = "combined"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class DatasetError(Exception):
    pass


class ScenarioError(Exception):
    pass


class AllNormalError(ScenarioError):
    """Relabeling left no abnormal image: all-normal test set."""


class AllAbnormalError(ScenarioError):
    """The test split has no normal image even before relabeling."""


@dataclass(frozen=True)
class TestImage:
    ref: str  # "<class>/test/<type>/<stem>"
    anomaly_type: str


@dataclass(frozen=True)
class DatasetIndex:
    """Deterministic, lexicographically ordered view of an MVTec-style tree.

    Layout: <root>/<class>/train/good/* and <root>/<class>/test/<type>/*.
    group_table maps class -> group name -> anomaly types.
    """

    root: Path
    classes: tuple[str, ...]
    train_refs: dict[str, tuple[str, ...]]
    test_images: dict[str, tuple[TestImage, ...]]
    group_table: dict[str, dict[str, tuple[str, ...]]]

    def groups(self, class_name: str) -> dict[str, tuple[str, ...]]:
        if class_name not in self.group_table:
            raise DatasetError(f"unknown class {class_name!r}")
        return self.group_table[class_name]

    def image_path(self, ref: str) -> Path:
        return self.root / ref


def load_group_table(path: str | Path | None = None) -> dict[str, dict[str, tuple[str, ...]]]:
    """Read a group table; the packaged default covers the MVTec AD classes."""
    if path is None:
        ref = resources.files("nandkit.assets").joinpath("mvtec_groups.json")
        with resources.as_file(ref) as p:
            raw = json.loads(Path(p).read_text(encoding="utf-8"))
    else:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    table: dict[str, dict[str, tuple[str, ...]]] = {}
    for cls, groups in raw.items():
        table[cls] = {g: tuple(types) for g, types in groups.items()}
    return table


def _image_stems(directory: Path) -> list[str]:
    return sorted(
        p.name for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )


def _validate_groups(
    class_name: str, types_present: set[str], groups: dict[str, tuple[str, ...]]
) -> None:
    # "good" never joins a group; "combined" is excluded from scenarios and
    # therefore exempt from coverage, like "good".
    claimed: dict[str, str] = {}
    for group, types in groups.items():
        for t in types:
            if t == GOOD:
                raise DatasetError(f"{class_name}: group {group!r} claims 'good'")
            if t in claimed:
                raise DatasetError(
                    f"{class_name}: type {t!r} appears in groups {claimed[t]!r} and {group!r}"
                )
            claimed[t] = group
    uncovered = types_present - set(claimed) - {GOOD, COMBINED}
    if uncovered:
        raise DatasetError(
            f"{class_name}: anomaly types {sorted(uncovered)} missing from the group table"
        )


def index_dataset(
    root: str | Path,
    group_table: dict[str, dict[str, tuple[str, ...]]] | None = None,
) -> DatasetIndex:
    """Index an MVTec-style tree.

    Classes absent from the group table get identity groups (one group per
    anomaly type, named after it), so synthetic datasets work unconfigured.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    shipped = load_group_table() if group_table is None else group_table
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DatasetError(f"no class directories under {root}")
    train_refs: dict[str, tuple[str, ...]] = {}
    test_images: dict[str, tuple[TestImage, ...]] = {}
    table: dict[str, dict[str, tuple[str, ...]]] = {}
    for cls in classes:
        test_dir = root / cls / "test"
        if not test_dir.is_dir():
            raise DatasetError(f"{cls}: missing test split at {test_dir}")
        train_dir = root / cls / "train" / GOOD
        train = (
            tuple(f"{cls}/train/{GOOD}/{name}" for name in _image_stems(train_dir))
            if train_dir.is_dir()
            else ()
        )
        types = sorted(p.name for p in test_dir.iterdir() if p.is_dir())
        images = []
        for t in types:
            for name in _image_stems(test_dir / t):
                images.append(TestImage(ref=f"{cls}/test/{t}/{name}", anomaly_type=t))
        if not images:
            raise DatasetError(f"{cls}: empty test split")
        present = {img.anomaly_type for img in images}
        if cls in shipped:
            groups = shipped[cls]
        else:
            groups = {t: (t,) for t in sorted(present) if t not in (GOOD, COMBINED)}
        _validate_groups(cls, present, groups)
        train_refs[cls] = train
        test_images[cls] = tuple(images)
        table[cls] = groups
    return DatasetIndex(
        root=root,
        classes=tuple(classes),
        train_refs=train_refs,
        test_images=test_images,
        group_table=table,
    )


@dataclass(frozen=True)
class Scenario:
    """One class's test split relabeled for one added anomaly group."""

    class_name: str
    added_group: str
    items: tuple[tuple[str, int], ...]  # (image ref, y)
    excluded: tuple[str, ...]


def build_scenario(index: DatasetIndex, class_name: str, group: str) -> Scenario:
    """Relabel group members (and good) to y=0, drop "combined" images.

    Raises AllNormalError when no y=1 image remains, e.g. for a class whose
    only anomaly type is the added group.
    """
    groups = index.groups(class_name)
    if group not in groups:
        raise DatasetError(f"unknown group {group!r} for class {class_name!r}")
    members = set(groups[group])
    items = []
    excluded = []
    for img in index.test_images[class_name]:
        if img.anomaly_type == COMBINED:
            excluded.append(img.ref)
            continue
        y = 0 if (img.anomaly_type == GOOD or img.anomaly_type in members) else 1
        items.append((img.ref, y))
    labels = {y for _, y in items}
    if labels == {0}:
        raise AllNormalError(
            f"{class_name}/{group}: relabeling produced an all-normal test set"
        )
    if labels == {1}:
        raise AllAbnormalError(
            f"{class_name}/{group}: test split has no normal image"
        )
    return Scenario(
        class_name=class_name,
        added_group=group,
        items=tuple(items),
        excluded=tuple(excluded),
    )


def auroc(scores, labels) -> float:
    """Exact rank-based AUROC with 0.5 credit per tie.

    Defined as (#(pos,neg) pairs with pos > neg + 0.5 * ties) / (n_pos*n_neg)
    and computed via sorting with midrank ties in O(n log n).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    if np.any(np.isnan(scores)):
        raise ValueError("NaN score passed to auroc")
    if not set(np.unique(labels)) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class ScorePair:
    ref: str
    label: int
    before: float
    after: float


@dataclass(frozen=True)
class EvalReport:
    """Before/after AUROC for one scenario, with raw scores for audit."""

    class_name: str
    group: str
    auroc_before: float
    auroc_after: float
    pairs: tuple[ScorePair, ...] = ()

    @property
    def delta(self) -> float:
        return self.auroc_after - self.auroc_before

    def cell(self) -> str:
        return format_cell(self.auroc_before, self.auroc_after)

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "group": self.group,
            "auroc_before": self.auroc_before,
            "auroc_after": self.auroc_after,
            "delta": self.delta,
            "cell": self.cell(),
            "pairs": [
                {
                    "image": p.ref,
                    "label": p.label,
                    "score_before": p.before,
                    "score_after": p.after,
                }
                for p in self.pairs
            ],
        }


def format_cell(before: float, after: float) -> str:
    """Render "73.6 -> 83.5 (+9.9)" style cells from AUROCs in [0, 1].

    Values print as percentages at one decimal (round-half-to-even via the
    float formatter); the delta is the difference of the two printed values
    so every cell is internally consistent.
    """
    b = float(f"{before * 100:.1f}")
    a = float(f"{after * 100:.1f}")
    return f"{b:.1f} → {a:.1f} ({a - b:+.1f})"


def run_before_after(
    base: Detector,
    suppressed: Detector,
    scenario: Scenario,
    encoder: EncoderClient,
) -> EvalReport:
    """Score every scenario image with both detectors and compare AUROCs."""
    pairs = []
    for ref, y in scenario.items:
        try:
            grid_set = encoder.encode_image(ref)
            s_before = score_from_map(base.score(grid_set))
            s_after = score_from_map(suppressed.score(grid_set))
        except Exception as exc:
            raise RuntimeError(f"scoring failed for image {ref!r}: {exc}") from exc
        pairs.append(ScorePair(ref=ref, label=y, before=s_before, after=s_after))
    labels = [p.label for p in pairs]
    return EvalReport(
        class_name=scenario.class_name,
        group=scenario.added_group,
        auroc_before=auroc([p.before for p in pairs], labels),
        auroc_after=auroc([p.after for p in pairs], labels),
        pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class ReportSummary:
    per_class: dict[str, tuple[float, float]]  # class -> (mean before, mean after)
    global_before: float
    global_after: float

    def lines(self) -> list[str]:
        out = []
        for cls in sorted(self.per_class):
            b, a = self.per_class[cls]
            out.append(f"{cls}: {format_cell(b, a)}")
        out.append(f"average: {format_cell(self.global_before, self.global_after)}")
        return out


def aggregate_report(reports: list[EvalReport]) -> ReportSummary:
    """Unweighted mean over each class's groups, then over classes."""
    if not reports:
        raise ValueError("no reports to aggregate")
    by_class: dict[str, list[EvalReport]] = {}
    for r in reports:
        by_class.setdefault(r.class_name, []).append(r)
    per_class = {
        cls: (
            float(np.mean([r.auroc_before for r in rs])),
            float(np.mean([r.auroc_after for r in rs])),
        )
        for cls, rs in by_class.items()
    }
    befores = [v[0] for v in per_class.values()]
    afters = [v[1] for v in per_class.values()]
    return ReportSummary(
        per_class=per_class,
        global_before=float(np.mean(befores)),
        global_after=float(np.mean(afters)),
    )
