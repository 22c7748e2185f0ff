"""Command-line surface: ingest, encode-stub, build-bank, eval, preview,
serve, make-fixture."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from .cache import CachedEncoder, cache_lock, ingest as run_ingest, save_bank
from .config import Config, load_config
from .detectors import build_bank
from .embeddings import StubEncoder
from .evalbench import ScenarioError, aggregate_report, index_dataset
from .formats import write_map_file
from .pipeline import Workbench
from .synth import build_fixture

__all__ = ["main"]


def _load_cfg(config_path: str | None) -> Config:
    return load_config(config_path)


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Path to a key=value config file.")
@click.pass_context
def main(ctx, config_path):
    """Normality-addition toolkit for image anomaly detectors."""
    ctx.obj = {"config_path": config_path}


@main.command("ingest")
@click.pass_context
def cmd_ingest(ctx):
    """Encode all dataset images into the embedding cache."""
    cfg = _load_cfg(ctx.obj["config_path"])
    bench = Workbench(cfg)
    if cfg.encoder == "cache":
        # nothing to produce; verify what an adapter already wrote
        missing = []
        for cls in bench.index.classes:
            for ref in list(bench.index.train_refs[cls]) + [
                i.ref for i in bench.index.test_images[cls]
            ]:
                try:
                    bench.encoder.encode_image(ref)
                except Exception:
                    missing.append(ref)
        if missing:
            raise click.ClickException(
                f"{len(missing)} cached embeddings missing or corrupt, e.g. {missing[0]!r}"
            )
        click.echo(f"verified {sum(len(bench.index.test_images[c]) for c in bench.index.classes)} cached test embeddings")
        return
    manifest, encoded = run_ingest(bench.index, bench.encoder, cfg.cache_dir)
    click.echo(f"ingest complete: {encoded} file(s) encoded, {len(manifest.images)} total")


@main.command("encode-stub")
@click.option("--seed", type=int, required=True)
@click.option("--force", is_flag=True, default=False, help="Re-encode even when hashes match.")
@click.pass_context
def cmd_encode_stub(ctx, seed, force):
    """Encode the dataset with the deterministic stub encoder."""
    cfg = _load_cfg(ctx.obj["config_path"])
    index = index_dataset(cfg.dataset_root)
    encoder = StubEncoder(seed=seed, layout=cfg.stub_layout, text_dim=cfg.stub_text_dim)
    manifest, encoded = run_ingest(index, encoder, cfg.cache_dir, force=force)
    click.echo(f"stub encode (seed {seed}): {encoded} file(s) encoded, {len(manifest.images)} total")


@main.command("build-bank")
@click.option("--class", "class_name", required=True)
@click.option("--fraction", type=float, default=None, help="Coreset fraction in (0, 1]; defaults to the config value.")
@click.option("--layer", type=int, default=None, help="Layer index feeding the bank.")
@click.pass_context
def cmd_build_bank(ctx, class_name, fraction, layer):
    """Build the normal-patch feature bank for one class from the cache."""
    cfg = _load_cfg(ctx.obj["config_path"])
    fraction = cfg.coreset_fraction if fraction is None else fraction
    layer = cfg.bank_layer if layer is None else layer
    index = index_dataset(cfg.dataset_root)
    if class_name not in index.classes:
        raise click.ClickException(f"unknown class {class_name!r}")
    refs = index.train_refs[class_name]
    if not refs:
        raise click.ClickException(f"class {class_name!r} has no train/good images")
    encoder = CachedEncoder(cache_dir=cfg.cache_dir, text_encoder=StubEncoder(seed=cfg.stub_seed, layout=cfg.stub_layout, text_dim=cfg.stub_text_dim))
    patches = []
    for ref in refs:
        grid_set = encoder.encode_image(ref)
        if layer >= len(grid_set.layers):
            raise click.ClickException(f"layer {layer} out of range for {ref!r}")
        patches.append(grid_set.layers[layer].flat().astype(np.float64))
    bank = build_bank(np.vstack(patches), fraction)
    entry = save_bank(bank, cfg.cache_dir, class_name, layer)
    click.echo(
        f"bank for {class_name}: {bank.entries.shape[0]} / {bank.source_count} patches "
        f"(fraction {fraction}), saved to {entry['path']}"
    )


@main.command("eval")
@click.option("--class", "class_name", required=True)
@click.option("--group", default=None, help="Single group; defaults to every group of the class.")
@click.option("--detector", type=click.Choice(["zs", "bank", "external"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Structured report path (JSON).")
@click.pass_context
def cmd_eval(ctx, class_name, group, detector, out):
    """Run the before/after protocol for one class (or one group)."""
    cfg = _load_cfg(ctx.obj["config_path"])
    with cache_lock(Path(cfg.cache_dir), exclusive=False):
        bench = Workbench(cfg)
        if class_name not in bench.index.classes:
            raise click.ClickException(f"unknown class {class_name!r}")
        groups = [group] if group else list(bench.index.groups(class_name))
        reports = []
        failures = []
        for g in groups:
            try:
                reports.append(bench.evaluate_group(class_name, g, detector))
            except ScenarioError as exc:
                failures.append((g, str(exc)))
                _echo_err(f"protocol error for {class_name}/{g}: {exc}")
    for r in reports:
        click.echo(f"{r.class_name}/{r.group}: {r.cell()}")
    if reports:
        summary = aggregate_report(reports)
        for line in summary.lines():
            click.echo(line)
    payload = {
        "reports": [r.to_dict() for r in reports],
        "failures": [{"group": g, "error": e} for g, e in failures],
    }
    out_path = Path(out) if out else Path(cfg.cache_dir) / "reports" / f"{class_name}.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    click.echo(f"structured report written to {out_path}")
    if not reports:
        raise click.ClickException("no group produced a report")


@main.command("preview")
@click.option("--class", "class_name", required=True)
@click.option("--image", "image_ref", required=True, help="Image ref like widget/test/scuff/000.png")
@click.option("--normality", required=True)
@click.option("--detector", type=click.Choice(["zs", "bank", "external"]), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for exported NAAM maps.")
@click.pass_context
def cmd_preview(ctx, class_name, image_ref, normality, detector, out):
    """Score one image before/after adding a normality; export the maps."""
    cfg = _load_cfg(ctx.obj["config_path"])
    with cache_lock(Path(cfg.cache_dir), exclusive=False):
        bench = Workbench(cfg)
        result = bench.preview(class_name, image_ref, normality, detector)
    out_dir = Path(out) if out else Path(cfg.cache_dir) / "previews"
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = image_ref.replace("/", "_")
    for name in ("map_before", "map_sup", "map_after"):
        path = out_dir / f"{stem}.{name}.naam"
        write_map_file(result[name], path)
    click.echo(
        json.dumps(
            {
                "image": result["image"],
                "normality_text": result["normality_text"],
                "detector": result["detector"],
                "score_before": result["score_before"],
                "score_after": result["score_after"],
                "maps_dir": str(out_dir),
            },
            indent=1,
        )
    )


@main.command("serve")
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1")
@click.pass_context
def cmd_serve(ctx, port, host):
    """Run the HTTP service backing the editor UI."""
    import uvicorn

    from .service import create_app

    cfg = _load_cfg(ctx.obj["config_path"])
    app = create_app(cfg)
    uvicorn.run(app, host=host, port=port or cfg.service_port, log_level="warning")


@main.command("make-fixture")
@click.option("--root", type=click.Path(file_okay=False), required=True)
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--seed", type=int, default=42)
@click.option("--write-config", type=click.Path(dir_okay=False), default=None, help="Also write a config file wired to the fixture.")
def cmd_make_fixture(root, cache_dir, seed, write_config):
    """Generate the synthetic planted-normality dataset (and its cache)."""
    index, fixture, manifest = build_fixture(root, cache_dir, seed=seed)
    n_imgs = sum(
        len(index.train_refs[c]) + len(index.test_images[c]) for c in index.classes
    )
    click.echo(f"fixture written to {root}: classes {list(index.classes)}, {n_imgs} images")
    if manifest is not None:
        click.echo(f"embedding cache written to {cache_dir} ({len(manifest.images)} files)")
    if write_config:
        lines = [
            f"dataset_root = {root}",
            f"cache_dir = {cache_dir or root + '-cache'}",
            "encoder = cache" if cache_dir else "encoder = stub",
            f"stub_seed = {seed}",
            "detector = zs",
            "coreset_fraction = 0.1",
        ]
        Path(write_config).write_text("\n".join(lines) + "\n", encoding="utf-8")
        click.echo(f"config written to {write_config}")


if __name__ == "__main__":
    main()
