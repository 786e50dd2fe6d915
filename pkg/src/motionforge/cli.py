"""The mf command-line interface: store init/seed, stage runners, synthetic
scene tooling, evaluation, the review service, and benchmark export."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import Config, ConfigError, load_config

log = logging.getLogger(__name__)


def _load_cfg(config_path) -> Config:
    try:
        return load_config(config_path)
    except (ConfigError, OSError) as exc:
        raise click.ClickException(f"config error: {exc}")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config file; env vars MF_SECTION__KEY override.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    ctx.obj = _load_cfg(config_path)


@main.command()
@click.pass_obj
def init(cfg: Config):
    """Create the data root and the job store."""
    from .store import JobStore

    Path(cfg.store.data_root).mkdir(parents=True, exist_ok=True)
    store = JobStore(cfg.store.db_path)
    store.close()
    click.echo(f"store initialized at {cfg.store.db_path}")


@main.command("seed")
@click.argument("video_ids", nargs=-1)
@click.option("--category", required=True)
@click.option("--all-scenes", is_flag=True,
              help="Seed every scene JSON in backends.scene_dir (synthetic mode).")
@click.pass_obj
def seed(cfg: Config, video_ids, category, all_scenes):
    """Register videos for collection."""
    from .store import JobStore
    from .workers import seed_video

    ids = list(video_ids)
    categories = {v: category for v in ids}
    if all_scenes:
        from .synth import SceneSpec

        for p in sorted(Path(cfg.backends.scene_dir).glob("*.json")):
            spec = SceneSpec.load(p)
            ids.append(spec.scene_id)
            categories[spec.scene_id] = spec.category
    if not ids:
        raise click.ClickException("nothing to seed; pass video ids or --all-scenes")
    store = JobStore(cfg.store.db_path)
    try:
        for vid in ids:
            seed_video(store, vid, categories[vid])
    finally:
        store.close()
    click.echo(f"seeded {len(ids)} videos")


@main.command()
@click.argument("stage")
@click.option("--workers", default=1, show_default=True)
@click.option("--max-seconds", default=None, type=float,
              help="Stop workers after this long even if not drained.")
@click.pass_obj
def run(cfg: Config, stage, workers, max_seconds):
    """Run one pipeline stage until its queue drains."""
    from .workers import PIPELINE_STAGES, run_stage

    if stage == "all":
        total = 0
        for s in PIPELINE_STAGES:
            n = run_stage(cfg, s, worker_count=workers, max_seconds=max_seconds)
            click.echo(f"{s}: {n} items")
            total += n
        click.echo(f"all stages drained ({total} items)")
        return
    try:
        n = run_stage(cfg, stage, worker_count=workers, max_seconds=max_seconds)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{stage}: {n} items processed")


@main.command()
@click.pass_obj
def status(cfg: Config):
    """Per-stage item counts."""
    from .store import JobStore

    store = JobStore(cfg.store.db_path)
    try:
        counts = store.counts()
    finally:
        store.close()
    click.echo(json.dumps(counts, indent=1))


@main.group()
def synth():
    """Synthetic scene tooling."""


@synth.command("gen")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--with-gt", is_flag=True, help="Also dump ground-truth annotations.")
def synth_gen(spec_path, out_dir, with_gt):
    """Render one scene spec to a frame-directory video."""
    import numpy as np

    from .synth import SceneSpec, render, write_scene_video

    rendered = render(SceneSpec.load(spec_path))
    out = write_scene_video(rendered, out_dir)
    if with_gt:
        gt_dir = Path(out_dir) / "gt"
        gt_dir.mkdir(exist_ok=True)
        (gt_dir / "cuts.json").write_text(json.dumps(rendered.gt.cuts))
        for aid, per in rendered.gt.actors.items():
            adir = gt_dir / aid
            (adir / "mask").mkdir(parents=True, exist_ok=True)
            kp = {}
            for f, g in per.items():
                g.mask.save_png(adir / "mask" / f"{f:06d}.png")
                kp[f"{f:06d}"] = g.keypoints.to_json()
            (adir / "keypoints.json").write_text(json.dumps(kp))
            boxes = {f"{f:06d}": g.bbox.to_list() for f, g in per.items()}
            (adir / "boxes.json").write_text(json.dumps(boxes))
        np.save(gt_dir / "depth.npy", np.stack(rendered.gt.depth))
    click.echo(f"rendered {rendered.spec.scene_id}: {len(rendered.frames)} frames -> {out}")


@synth.command("corpus")
@click.option("--out", "out_dir", default="fixtures/scenes", show_default=True)
def synth_corpus(out_dir):
    """Regenerate the 12-scene fixture corpus."""
    from .corpus import write_corpus

    paths = write_corpus(out_dir)
    click.echo(f"wrote {len(paths)} scene specs to {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_root", required=True, type=click.Path(exists=True))
@click.option("--method", default="method", show_default=True)
@click.option("--out", "out_dir", default="eval_out", show_default=True)
@click.option("--per-sequence-mean", is_flag=True,
              help="Average per-sequence scores instead of pooling frames.")
@click.pass_obj
def evaluate(cfg: Config, manifest_path, pred_root, method, out_dir, per_sequence_mean):
    """Score a prediction set against a benchmark manifest."""
    from . import benchmark

    manifest = benchmark.load_manifest(manifest_path)
    missing = benchmark.manifest_missing_files(manifest)
    if missing:
        raise click.ClickException(f"manifest references missing files: {missing[:3]}")
    report = benchmark.evaluate(
        manifest, pred_root, method=method,
        alphas=tuple(cfg.eval.pck_alphas), kt_stride=cfg.eval.kt_stride,
        per_sequence_mean=per_sequence_mean or cfg.eval.per_sequence_mean)
    json_path, table_path = benchmark.write_report([report], out_dir)
    click.echo(benchmark.format_table([report]))
    if report.excluded:
        click.echo(f"excluded sequences: {json.dumps(report.excluded, indent=1)}")
    click.echo(f"report: {json_path} ; table: {table_path}")


@main.command()
@click.option("--port", default=None, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(cfg: Config, port, host):
    """Run the review/export HTTP service."""
    import uvicorn

    from .service import build_review_app

    app = build_review_app(cfg)
    uvicorn.run(app, host=host, port=port or cfg.review.port, log_level="info")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--cap", default=None, type=int, help="Max accepted tracks per category.")
@click.pass_obj
def export(cfg: Config, out_dir, cap):
    """Export accepted tracks as a benchmark manifest."""
    from . import benchmark
    from .service import accepted_records
    from .store import JobStore

    store = JobStore(cfg.store.db_path)
    try:
        records = accepted_records(store)
    finally:
        store.close()
    try:
        manifest = benchmark.export_benchmark(
            records, out_dir, crop_size=cfg.crop.size,
            per_category_cap=cap if cap is not None else cfg.review.per_category_cap)
    except (ValueError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"exported {len(manifest.sequences)} sequences to {out_dir}")


@main.command()
@click.argument("category")
@click.option("--n-breeds", default=None, type=int)
@click.option("--n-contexts", default=None, type=int)
@click.pass_obj
def queries(cfg: Config, category, n_breeds, n_contexts):
    """Generate search queries for a category via the text backend."""
    from .backends.queries import generate_queries
    from .workers import gateway_from_config

    gateway = gateway_from_config(cfg, Path(cfg.store.data_root))
    out = generate_queries(category, gateway,
                           n_breeds=n_breeds or cfg.queries.n_breeds,
                           n_contexts=n_contexts or cfg.queries.n_contexts,
                           seed=cfg.queries.seed)
    for q in out:
        click.echo(q)


if __name__ == "__main__":
    sys.exit(main())
