"""Prompt ensembles, representative text features, and phrase generation.

A prompt ensemble is the cartesian product of short state phrases
("flawless carpet") and template strings ("a photo of a {}"). The mean of
the ensemble's text embeddings is the representative feature for one role:
normal, abnormal, or an added normality.
"""

from __future__ import annotations

import logging
import subprocess
import urllib.request
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Literal, Protocol, Sequence

import numpy as np

from .embeddings import EncoderClient, as_embedding, softmax_over
from .formats import read_embedding_file

__all__ = [
    "PromptSet",
    "TextFeature",
    "NormalitySpec",
    "PhraseGeneratorClient",
    "HttpPhraseGenerator",
    "SubprocessPhraseGenerator",
    "compose_prompts",
    "aggregate_text_feature",
    "generate_phrases",
    "zero_shot_classify",
    "load_phrase_asset",
    "default_templates",
    "default_states",
    "build_text_feature",
    "load_prompt_embeddings",
]

log = logging.getLogger(__name__)

Role = Literal["normal", "abnormal", "addition"]
PLACEHOLDER = "{}"


@dataclass(frozen=True)
class PromptSet:
    """State phrases x templates, rendered in state-major order."""

    states: tuple[str, ...]
    templates: tuple[str, ...]
    rendered: tuple[str, ...]


@dataclass(frozen=True)
class TextFeature:
    """Representative embedding for one prompt ensemble."""

    vector: np.ndarray
    source_prompt_count: int
    role: Role

    def __post_init__(self):
        if self.source_prompt_count < 1:
            raise ValueError("source_prompt_count must be >= 1")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size < 1:
            raise ValueError("text feature vector must be a non-empty 1-D array")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class NormalitySpec:
    """A text-described pattern to start treating as normal."""

    class_name: str
    normality_text: str
    phrases: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.normality_text:
            raise ValueError("normality_text must be non-empty")
        if not self.class_name:
            raise ValueError("class_name must be non-empty")
        object.__setattr__(self, "phrases", tuple(self.phrases))


class PhraseGeneratorClient(Protocol):
    """Text-in, phrase-lines-out contract for an external phrase source."""

    def generate(self, instruction: str) -> list[str]: ...


class HttpPhraseGenerator:
    """POSTs the instruction to a configured URL; response body is
    newline-separated phrases."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def generate(self, instruction: str) -> list[str]:
        req = urllib.request.Request(
            self.url,
            data=instruction.encode("utf-8"),
            headers={"Content-Type": "text/plain; charset=utf-8"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            body = resp.read().decode("utf-8")
        return [line.strip() for line in body.splitlines() if line.strip()]


class SubprocessPhraseGenerator:
    """Pipes the instruction to a command's stdin; stdout lines are phrases."""

    def __init__(self, argv: Sequence[str], timeout: float = 10.0):
        self.argv = list(argv)
        self.timeout = timeout

    def generate(self, instruction: str) -> list[str]:
        proc = subprocess.run(
            self.argv,
            input=instruction.encode("utf-8"),
            capture_output=True,
            timeout=self.timeout,
            check=True,
        )
        body = proc.stdout.decode("utf-8")
        return [line.strip() for line in body.splitlines() if line.strip()]


def _check_template(template: str) -> None:
    if template.count(PLACEHOLDER) != 1:
        raise ValueError(
            f"template must contain exactly one {PLACEHOLDER!r} placeholder: {template!r}"
        )


def compose_prompts(states: Sequence[str], templates: Sequence[str]) -> PromptSet:
    """Render the full cartesian product, states outermost."""
    if len(states) == 0:
        raise ValueError("states must be non-empty")
    if len(templates) == 0:
        raise ValueError("templates must be non-empty")
    for t in templates:
        _check_template(t)
    rendered = tuple(t.replace(PLACEHOLDER, s) for s in states for t in templates)
    return PromptSet(states=tuple(states), templates=tuple(templates), rendered=rendered)


def aggregate_text_feature(
    prompt_embeddings: Sequence[np.ndarray], role: Role
) -> TextFeature:
    """Arithmetic mean of the prompt embeddings, deliberately not renormalized."""
    if len(prompt_embeddings) == 0:
        raise ValueError("prompt embedding list must be non-empty")
    mat = np.stack([np.asarray(e, dtype=np.float64) for e in prompt_embeddings])
    if mat.ndim != 2:
        raise ValueError("prompt embeddings must share one dimension")
    # summing each column in sorted order makes the mean bit-exactly
    # permutation-invariant over the input list
    mean = np.sort(mat, axis=0).sum(axis=0) / mat.shape[0]
    return TextFeature(
        vector=mean, source_prompt_count=len(prompt_embeddings), role=role
    )


INSTRUCTION_PATTERN = "Generate concise phrases describing defects of type '{t}' in {cls}"
FALLBACK_PATTERNS = ("{t}", "{cls} with {t}", "{t} on {cls}")


def generate_phrases(
    spec: NormalitySpec, generator: PhraseGeneratorClient | None = None
) -> NormalitySpec:
    """Fill spec.phrases from the generator, or from the built-in patterns.

    Generator failures fall back with a warning and never abort. Output is
    lowercased, deduplicated, and order-stable.
    """
    phrases: list[str] = []
    if generator is not None:
        instruction = INSTRUCTION_PATTERN.format(t=spec.normality_text, cls=spec.class_name)
        try:
            phrases = generator.generate(instruction)
        except Exception as exc:
            log.warning("phrase generator failed (%s); using built-in patterns", exc)
            phrases = []
    if not phrases:
        phrases = [
            p.format(t=spec.normality_text, cls=spec.class_name)
            for p in FALLBACK_PATTERNS
        ]
    seen = set()
    cleaned = []
    for p in phrases:
        p = p.strip().lower()
        if p and p not in seen:
            seen.add(p)
            cleaned.append(p)
    if not cleaned:
        raise ValueError("phrase generation produced no usable phrases")
    return replace(spec, phrases=tuple(cleaned))


def zero_shot_classify(
    image_feature: np.ndarray, class_features: Sequence[TextFeature]
) -> np.ndarray:
    """P(class | image) over the given classes via softmax of cosine similarities."""
    if len(class_features) == 0:
        raise ValueError("class feature list must be non-empty")
    return softmax_over(image_feature, [c.vector for c in class_features])


def _read_lines(path: Path) -> list[str]:
    lines = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def load_phrase_asset(path: str | Path | None, asset_name: str) -> list[str]:
    """Read a one-per-line phrase file; falls back to the packaged asset."""
    if path is not None:
        return _read_lines(Path(path))
    ref = resources.files("nandkit.assets").joinpath(asset_name)
    with resources.as_file(ref) as p:
        return _read_lines(p)


def default_templates(path: str | Path | None = None) -> list[str]:
    return load_phrase_asset(path, "templates.txt")


def default_states(class_name: str, role: Role, path: str | Path | None = None) -> list[str]:
    """State phrases for a class, rendered from the packaged pattern lists."""
    name = {"normal": "states_normal.txt", "abnormal": "states_abnormal.txt"}.get(role)
    if name is None:
        raise ValueError("default states exist only for the normal and abnormal roles")
    patterns = load_phrase_asset(path, name)
    return [p.replace(PLACEHOLDER, class_name) for p in patterns]


def build_text_feature(
    states: Sequence[str],
    role: Role,
    encoder: EncoderClient,
    templates: Sequence[str] | None = None,
) -> TextFeature:
    """Compose, embed, and aggregate one ensemble in a single step."""
    templates = list(templates) if templates is not None else default_templates()
    prompt_set = compose_prompts(states, templates)
    embeddings = [encoder.encode_text(p) for p in prompt_set.rendered]
    return aggregate_text_feature(embeddings, role)


def load_prompt_embeddings(path: str | Path) -> list[np.ndarray]:
    """Read an adapter-written prompt embedding file.

    Prompt files reuse the grid format with a single (n_prompts x 1) layer;
    returns the embeddings in stored order.
    """
    grid_set = read_embedding_file(path)
    layer = grid_set.layers[0]
    return [as_embedding(layer.grid[i, 0]) for i in range(layer.height)]
