"""Wiring between configuration and the scoring machinery.

Builds encoders, detectors, and suppressed detectors from a Config, and runs
the scenario protocol. Both the CLI and the HTTP service go through here so
their numbers come from one code path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cache import CachedEncoder, load_bank
from .config import Config
from .detectors import (
    Detector,
    ExternalMapDetector,
    FeatureBankDetector,
    ProjectionSpec,
    ZeroShotTextDetector,
    score_from_map,
)
from .embeddings import EncoderClient, StubEncoder
from .evalbench import (
    DatasetIndex,
    EvalReport,
    build_scenario,
    index_dataset,
    load_group_table,
    run_before_after,
)
from .nand import SuppressedDetector, add_normality
from .prompts import (
    HttpPhraseGenerator,
    NormalitySpec,
    PhraseGeneratorClient,
    SubprocessPhraseGenerator,
    build_text_feature,
    default_states,
    generate_phrases,
    load_phrase_asset,
)

__all__ = ["Workbench"]

log = logging.getLogger(__name__)


@dataclass
class _ClassState:
    detectors: dict[str, Detector]
    suppressed: dict[tuple[str, str], SuppressedDetector]


class Workbench:
    """Immutable-after-load view of one dataset + cache + config.

    Detector construction is lazy and memoized per (class, detector kind);
    nothing here mutates the cache.
    """

    def __init__(self, config: Config, need_dataset: bool = True):
        self.config = config
        self.templates = load_phrase_asset(config.templates_path, "templates.txt")
        group_table = (
            load_group_table(config.group_table_path)
            if config.group_table_path is not None
            else None
        )
        self.index: DatasetIndex | None = None
        if need_dataset:
            self.index = index_dataset(config.dataset_root, group_table)
        self.encoder = self._build_encoder()
        self.projection = (
            ProjectionSpec.from_file(config.projection_path)
            if config.projection_path is not None
            else None
        )
        self._states: dict[str, _ClassState] = {}

    # encoders ---------------------------------------------------------

    def _stub(self) -> StubEncoder:
        cfg = self.config
        return StubEncoder(
            seed=cfg.stub_seed, layout=cfg.stub_layout, text_dim=cfg.stub_text_dim
        )

    def _build_encoder(self) -> EncoderClient:
        cfg = self.config
        if cfg.encoder == "stub":
            return self._stub()
        return CachedEncoder(cache_dir=cfg.cache_dir, text_encoder=self._stub())

    def phrase_generator(self) -> PhraseGeneratorClient | None:
        cfg = self.config
        if cfg.phrase_generator_url:
            return HttpPhraseGenerator(cfg.phrase_generator_url)
        if cfg.phrase_generator_command:
            return SubprocessPhraseGenerator(cfg.phrase_generator_command.split())
        return None

    # detectors --------------------------------------------------------

    def _class_state(self, class_name: str) -> _ClassState:
        if class_name not in self._states:
            self._states[class_name] = _ClassState(detectors={}, suppressed={})
        return self._states[class_name]

    def _normal_states(self, class_name: str) -> list[str]:
        return default_states(class_name, "normal", self.config.states_normal_path)

    def _abnormal_states(self, class_name: str) -> list[str]:
        return default_states(class_name, "abnormal", self.config.states_abnormal_path)

    def base_detector(self, class_name: str, kind: str | None = None) -> Detector:
        cfg = self.config
        kind = kind or cfg.detector
        state = self._class_state(class_name)
        if kind in state.detectors:
            return state.detectors[kind]
        if kind == "zs":
            f_nor = build_text_feature(
                self._normal_states(class_name), "normal", self.encoder, self.templates
            )
            f_abn = build_text_feature(
                self._abnormal_states(class_name), "abnormal", self.encoder, self.templates
            )
            det: Detector = ZeroShotTextDetector(
                normal_feature=f_nor,
                abnormal_feature=f_abn,
                projection=self.projection,
                out_size=cfg.detector_size,
                layers=cfg.layers,
                sigma=cfg.smoothing_sigma,
            )
        elif kind == "bank":
            bank, layer_index = load_bank(cfg.cache_dir, class_name)
            det = FeatureBankDetector(
                bank=bank,
                layer_index=layer_index,
                out_size=cfg.detector_size,
                sigma=cfg.smoothing_sigma,
            )
        elif kind == "external":
            if cfg.external_map_dir is None:
                raise ValueError("external detector requires external_map_dir")
            det = ExternalMapDetector(root=Path(cfg.external_map_dir))
        else:
            raise ValueError(f"unknown detector kind {kind!r}")
        state.detectors[kind] = det
        return det

    def suppressed_detector(
        self, class_name: str, normality_text: str, kind: str | None = None
    ) -> SuppressedDetector:
        cfg = self.config
        kind = kind or cfg.detector
        state = self._class_state(class_name)
        key = (kind, normality_text.strip().lower())
        if key in state.suppressed:
            return state.suppressed[key]
        base = self.base_detector(class_name, kind)
        spec = generate_phrases(
            NormalitySpec(class_name=class_name, normality_text=normality_text),
            self.phrase_generator(),
        )
        det = add_normality(
            base,
            spec,
            self.encoder,
            projection=self.projection,
            templates=self.templates,
            suppression_size=cfg.suppression_size,
            layers=cfg.layers,
        )
        state.suppressed[key] = det
        return det

    # evaluation -------------------------------------------------------

    def evaluate_group(
        self, class_name: str, group: str, kind: str | None = None
    ) -> EvalReport:
        if self.index is None:
            raise RuntimeError("workbench loaded without a dataset")
        scenario = build_scenario(self.index, class_name, group)
        base = self.base_detector(class_name, kind)
        suppressed = self.suppressed_detector(class_name, group, kind)
        return run_before_after(base, suppressed, scenario, self.encoder)

    def preview(
        self, class_name: str, image_ref: str, normality_text: str, kind: str | None = None
    ) -> dict:
        """Before/suppression/after maps and scores for one image."""
        base = self.base_detector(class_name, kind)
        suppressed = self.suppressed_detector(class_name, normality_text, kind)
        grid_set = self.encoder.encode_image(image_ref)
        map_before = base.score(grid_set)
        sup = suppressed.suppression(grid_set)
        map_after = suppressed.score(grid_set)
        return {
            "image": image_ref,
            "normality_text": normality_text,
            "detector": kind or self.config.detector,
            "score_before": score_from_map(map_before),
            "score_after": score_from_map(map_after),
            "map_before": np.asarray(map_before.scores),
            "map_sup": np.asarray(sup.values),
            "map_after": np.asarray(map_after.scores),
        }
