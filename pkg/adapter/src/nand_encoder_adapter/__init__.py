"""Offline sidecar: extract vision-language embeddings into NAEB caches."""

from .config import AdapterConfig, load_adapter_config
from .extract import discover_images, extract_images, extract_prompts
from .model import load_encoder
from .naebio import write_naeb

__version__ = "0.1.0"
