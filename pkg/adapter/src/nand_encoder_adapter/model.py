"""Vision-language encoder bundle behind one small interface.

Two ways to resolve a model identifier:

  - "random-tiny:<seed>": a small CLIP with randomly initialized weights,
    deterministic under the seed. No downloads, no tokenizer assets (prompts
    go through a stable hash tokenizer). Exists so cache extraction and the
    downstream format contract can be exercised end to end offline; the
    embeddings are meaningless.
  - anything else: a checkpoint identifier for the hub (or a local path),
    loaded with its own processor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


def _projected(out) -> torch.Tensor:
    """get_*_features returns a tensor (transformers 4.x) or an output object
    whose pooler_output holds the projected features (5.x)."""
    if isinstance(out, torch.Tensor):
        return out
    return out.pooler_output

TINY_PREFIX = "random-tiny:"
_TINY_VOCAB = 512
_TINY_MAX_TOKENS = 16


@dataclass
class EncoderBundle:
    model_id: str
    model: "torch.nn.Module"
    image_batch: "Preprocess"
    text_batch: "Tokenize"
    hidden_dim: int
    grid_size: int

    def vision_hidden_states(self, pixel_values: torch.Tensor) -> tuple[torch.Tensor, ...]:
        with torch.no_grad():
            out = self.model.vision_model(pixel_values=pixel_values, output_hidden_states=True)
        return out.hidden_states

    def image_features(self, pixel_values: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            out = self.model.get_image_features(pixel_values=pixel_values)
        return _projected(out)

    def text_features(self, prompts: list[str]) -> torch.Tensor:
        input_ids, attention_mask = self.text_batch(prompts)
        with torch.no_grad():
            out = self.model.get_text_features(
                input_ids=input_ids, attention_mask=attention_mask
            )
        return _projected(out)


class Preprocess:
    """Resize + CLIP normalization; hub models use their own processor."""

    def __init__(self, resolution: int, processor=None):
        self.resolution = resolution
        self.processor = processor

    def __call__(self, images: list[Image.Image]) -> torch.Tensor:
        if self.processor is not None:
            return self.processor(images=images, return_tensors="pt")["pixel_values"]
        arrays = []
        for img in images:
            img = img.convert("RGB").resize(
                (self.resolution, self.resolution), Image.Resampling.BICUBIC
            )
            arr = np.asarray(img, dtype=np.float32) / 255.0
            arr = (arr - np.array(CLIP_MEAN, dtype=np.float32)) / np.array(
                CLIP_STD, dtype=np.float32
            )
            arrays.append(arr.transpose(2, 0, 1))
        return torch.from_numpy(np.stack(arrays))


class Tokenize:
    """Stable hash tokenizer for the random-tiny mode, or the hub tokenizer."""

    def __init__(self, processor=None):
        self.processor = processor

    def __call__(self, prompts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        if self.processor is not None:
            enc = self.processor(
                text=prompts, return_tensors="pt", padding=True, truncation=True
            )
            return enc["input_ids"], enc["attention_mask"]
        ids = torch.zeros((len(prompts), _TINY_MAX_TOKENS), dtype=torch.long)
        mask = torch.zeros((len(prompts), _TINY_MAX_TOKENS), dtype=torch.long)
        for row, prompt in enumerate(prompts):
            tokens = [1]  # bos
            for word in prompt.lower().split()[: _TINY_MAX_TOKENS - 2]:
                digest = hashlib.blake2b(word.encode("utf-8"), digest_size=4).digest()
                tokens.append(3 + int.from_bytes(digest, "little") % (_TINY_VOCAB - 3))
            tokens.append(2)  # eos
            ids[row, : len(tokens)] = torch.tensor(tokens, dtype=torch.long)
            mask[row, : len(tokens)] = 1
        return ids, mask


def _build_tiny(seed: int, resolution: int) -> EncoderBundle:
    from transformers import CLIPConfig, CLIPModel

    patch = 16
    if resolution % patch != 0:
        raise ValueError(f"random-tiny resolution must be a multiple of {patch}")
    config = CLIPConfig(
        projection_dim=24,
        text_config={
            "hidden_size": 32,
            "intermediate_size": 64,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "vocab_size": _TINY_VOCAB,
            "max_position_embeddings": _TINY_MAX_TOKENS,
            "bos_token_id": 1,
            "eos_token_id": 2,
            "pad_token_id": 0,
        },
        vision_config={
            "hidden_size": 32,
            "intermediate_size": 64,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "image_size": resolution,
            "patch_size": patch,
        },
    )
    torch.manual_seed(seed)
    model = CLIPModel(config)
    model.eval()
    return EncoderBundle(
        model_id=f"{TINY_PREFIX}{seed}",
        model=model,
        image_batch=Preprocess(resolution),
        text_batch=Tokenize(),
        hidden_dim=32,
        grid_size=resolution // patch,
    )


def _build_hub(model_id: str, resolution: int) -> EncoderBundle:
    from transformers import CLIPModel, CLIPProcessor

    model = CLIPModel.from_pretrained(model_id)
    model.eval()
    processor = CLIPProcessor.from_pretrained(model_id)
    vision = model.config.vision_config
    return EncoderBundle(
        model_id=model_id,
        model=model,
        image_batch=Preprocess(resolution, processor=processor),
        text_batch=Tokenize(processor=processor.tokenizer),
        hidden_dim=vision.hidden_size,
        grid_size=vision.image_size // vision.patch_size,
    )


def load_encoder(model_id: str, resolution: int) -> EncoderBundle:
    # single-threaded math keeps reruns bit-identical
    torch.set_num_threads(1)
    if model_id.startswith(TINY_PREFIX):
        seed = int(model_id[len(TINY_PREFIX) :])
        return _build_tiny(seed, resolution)
    return _build_hub(model_id, resolution)
