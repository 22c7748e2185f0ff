"""Normality addition: suppression maps composed onto any detector's output.

Given a text-described normality, a suppression map marks where a query
image matches it; the final map is the base map times (1 - suppression),
so flagged-but-now-normal regions stop dominating the image score while
everything else keeps its ranking.

One deliberate deviation from the summed zero-shot map: suppression values
must stay in [0, 1] for (1 - s) to be a valid attenuation, so layer maps
are averaged here instead of summed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detectors import Detector, ProjectionSpec, _layer_text_maps
from .embeddings import EncoderClient, PatchGridSet
from .maps import AnomalyMap, resize_bilinear
from .prompts import (
    NormalitySpec,
    TextFeature,
    build_text_feature,
    default_states,
    default_templates,
    generate_phrases,
)

__all__ = [
    "SuppressionMap",
    "SuppressedDetector",
    "suppression_map",
    "apply_suppression",
    "combine_suppressions",
    "add_normality",
]

DEFAULT_SUPPRESSION_SIZE = (256, 256)


@dataclass(frozen=True)
class SuppressionMap:
    """[0, 1]-valued grid marking regions that match an added normality."""

    values: np.ndarray  # (height, width) float64
    normality: NormalitySpec | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"suppression map must be a non-empty 2-D grid, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("suppression map contains non-finite values")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("suppression map entries must lie in [0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def suppression_map(
    grid_set: PatchGridSet,
    f_add: TextFeature,
    f_nor: TextFeature,
    projection: ProjectionSpec | None = None,
    out_size: tuple[int, int] = DEFAULT_SUPPRESSION_SIZE,
    layers: Sequence[int] | None = None,
    normality: NormalitySpec | None = None,
) -> SuppressionMap:
    """Added-normality presence map: the zero-shot computation with f_add in
    place of the abnormal feature, averaged (not summed) across layers."""
    projection = projection or ProjectionSpec.identity()
    layer_maps = _layer_text_maps(grid_set, f_add, f_nor, projection, out_size, layers)
    mean = np.mean(layer_maps, axis=0)
    # bilinear interpolation of values in [0,1] stays in [0,1] up to rounding
    return SuppressionMap(values=np.clip(mean, 0.0, 1.0), normality=normality)


def apply_suppression(amap: AnomalyMap, sup: SuppressionMap) -> AnomalyMap:
    """Final map = base map * (1 - suppression), never increasing any entry.

    The suppression map is resized to the base map's lattice first; base
    detectors differ in resolution while suppression maps default to 256x256.
    """
    values = sup.values
    if values.shape != amap.scores.shape:
        values = np.clip(resize_bilinear(values, amap.height, amap.width), 0.0, 1.0)
    final = amap.scores * (1.0 - values)
    return AnomalyMap(scores=final, origin=f"{amap.origin}+suppressed")


def combine_suppressions(maps: Sequence[SuppressionMap]) -> SuppressionMap:
    """One map equivalent to applying each in turn: 1 - prod(1 - s_i).

    Sequential application is order-independent, so simultaneous normalities
    reduce to this single combined map.
    """
    if len(maps) == 0:
        raise ValueError("need at least one suppression map")
    keep = np.ones_like(maps[0].values)
    for m in maps:
        if m.values.shape != keep.shape:
            raise ValueError("suppression maps must share one lattice to combine")
        keep = keep * (1.0 - m.values)
    return SuppressionMap(values=1.0 - keep, normality=None)


@dataclass(frozen=True)
class SuppressedDetector:
    """A base detector with one normality added.

    score(x) equals apply_suppression(base.score(x), suppression_map(x)) for
    every input; stack instances to add several normalities.
    """

    base: Detector
    spec: NormalitySpec
    f_add: TextFeature
    f_nor: TextFeature
    projection: ProjectionSpec | None = None
    suppression_size: tuple[int, int] = DEFAULT_SUPPRESSION_SIZE
    layers: tuple[int, ...] | None = None
    kind: str = "suppressed"

    def suppression(self, grid_set: PatchGridSet) -> SuppressionMap:
        return suppression_map(
            grid_set,
            self.f_add,
            self.f_nor,
            self.projection,
            self.suppression_size,
            self.layers,
            self.spec,
        )

    def score(self, grid_set: PatchGridSet) -> AnomalyMap:
        return apply_suppression(self.base.score(grid_set), self.suppression(grid_set))


def add_normality(
    base: Detector,
    spec: NormalitySpec,
    text_encoder: EncoderClient,
    projection: ProjectionSpec | None = None,
    templates: Sequence[str] | None = None,
    suppression_size: tuple[int, int] = DEFAULT_SUPPRESSION_SIZE,
    layers: Sequence[int] | None = None,
) -> SuppressedDetector:
    """Build the suppressed detector for one normality spec.

    Phrases must already be generated (run generate_phrases first); they act
    as state phrases combined with the template ensemble, and the mean of the
    rendered prompts' embeddings is the added-normality feature. The normal
    feature reuses the base detector's normal ensemble when it has one,
    otherwise the generic default ensemble for the class.
    """
    if not spec.phrases:
        raise ValueError("normality spec has no phrases; run generate_phrases first")
    templates = list(templates) if templates is not None else default_templates()
    f_add = build_text_feature(spec.phrases, "addition", text_encoder, templates)
    f_nor = getattr(base, "normal_feature", None)
    if f_nor is None:
        f_nor = build_text_feature(
            default_states(spec.class_name, "normal"), "normal", text_encoder, templates
        )
    return SuppressedDetector(
        base=base,
        spec=spec,
        f_add=f_add,
        f_nor=f_nor,
        projection=projection,
        suppression_size=tuple(suppression_size),
        layers=tuple(layers) if layers is not None else None,
    )


def make_spec(class_name: str, normality_text: str, generator=None) -> NormalitySpec:
    """Convenience: spec with phrases filled in one call."""
    return generate_phrases(
        NormalitySpec(class_name=class_name, normality_text=normality_text), generator
    )
