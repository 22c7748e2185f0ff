"""Toolkit for adding text-described normalities to trained image anomaly
detectors, plus the relabeling evaluation protocol that measures it."""

from .detectors import (
    ExternalMapDetector,
    FeatureBank,
    FeatureBankDetector,
    ProjectionSpec,
    ZeroShotTextDetector,
    bank_anomaly_map,
    build_bank,
    load_external_map,
    score_from_map,
    zs_anomaly_map,
)
from .embeddings import (
    EncoderClient,
    LayerGrid,
    PatchGridSet,
    RegionBias,
    StubEncoder,
    as_embedding,
    cosine_similarity,
    softmax_over,
    stub_encode,
)
from .evalbench import (
    AllNormalError,
    DatasetIndex,
    EvalReport,
    Scenario,
    aggregate_report,
    auroc,
    build_scenario,
    format_cell,
    index_dataset,
    load_group_table,
    run_before_after,
)
from .formats import (
    BadMagicError,
    DimensionMismatchError,
    EmbeddingFileError,
    TruncatedPayloadError,
    VersionMismatchError,
    read_embedding_file,
    read_map_file,
    write_embedding_file,
    write_map_file,
)
from .maps import AnomalyMap, resize_bilinear
from .nand import (
    SuppressedDetector,
    SuppressionMap,
    add_normality,
    apply_suppression,
    combine_suppressions,
    make_spec,
    suppression_map,
)
from .prompts import (
    NormalitySpec,
    PromptSet,
    TextFeature,
    aggregate_text_feature,
    build_text_feature,
    compose_prompts,
    default_states,
    default_templates,
    generate_phrases,
    zero_shot_classify,
)

__version__ = "0.1.0"
