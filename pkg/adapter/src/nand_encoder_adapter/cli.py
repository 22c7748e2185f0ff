"""Standalone command: extract image and prompt embedding caches."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_adapter_config
from .extract import extract_images, extract_prompts
from .model import load_encoder


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nand-encoder-adapter",
        description="Run a vision-language encoder over a dataset and write "
        "NAEB embedding caches.",
    )
    parser.add_argument("--config", type=Path, default=None, help="key = value config file")
    parser.add_argument("--prompts", type=Path, default=None,
                        help="optional text file (one prompt per line) to embed as well")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    config = load_adapter_config(args.config)
    bundle = load_encoder(config.model_id, config.input_resolution)
    written = extract_images(config, bundle)
    print(f"wrote {len(written)} embedding file(s) to {config.output_dir}")
    if args.prompts is not None:
        prompts = [
            line.strip()
            for line in args.prompts.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        target = extract_prompts(prompts, config, bundle)
        print(f"wrote {len(prompts)} prompt embedding(s) to {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
