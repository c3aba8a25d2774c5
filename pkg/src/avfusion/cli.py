"""Command-line interface.

Subcommands mirror the pipeline stages: ``prep-audio``, ``prep-video``,
``augment``, ``embed``, ``train``, ``eval``, ``compare``, ``search``.
Global flags ``--seed``, ``--config``, and ``--threads`` apply to every
subcommand; a JSON config file provides defaults that individual flags
override. Exit codes: 0 on success, a distinct nonzero code per error
class (see :mod:`avfusion.errors`).
"""

from __future__ import annotations

import json
import shlex
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import augment as aug
from . import harness
from .audio import frame_examples, logmel_from_waveform, resample_to_16k_mono
from .embeddings import EmbeddingRecord, Modality, write_embeddings
from .errors import AVFusionError, MissingArtifacts, ParseError
from .fusion import FusionClassifier, ToyAudioEncoder, ToyVideoEncoder, embed_clip
from .manifest import Split, load_manifest, random_split, save_manifest, with_split
from .tensorio import read_framestack, read_logmel, read_raw_frames, write_framestack, write_logmel
from .video import RawFrameSequence, sample_frames
from .wavio import read_wav

_CONFIG_KEYS = {
    "seed", "threads", "strategy", "train_fraction", "run_count", "dropout",
    "learning_rate", "batch_size", "epochs", "intermediate_hidden",
    "branch_hidden", "combiner_hidden", "copies_per_clip", "min_ops",
    "max_ops", "frame_count", "audio_dim",
}

_DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "strategy": "hybrid",
    "train_fraction": 0.8,
    "run_count": 3,
    "dropout": 0.5,
    "learning_rate": 1e-4,
    "batch_size": 7,
    "epochs": 30,
    "intermediate_hidden": (256, 64),
    "branch_hidden": (64,),
    "combiner_hidden": (16,),
    "copies_per_clip": 2,
    "min_ops": 1,
    "max_ops": 3,
    "frame_count": 32,
    "audio_dim": 128,
}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"config file {path}: {exc}") from exc
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ParseError(f"config file {path}: unknown keys {sorted(unknown)}")
    for key in ("intermediate_hidden", "branch_hidden", "combiner_hidden"):
        if key in data:
            data[key] = tuple(data[key])
    return data


class Settings:
    """Defaults < config file < explicit CLI flags."""

    def __init__(self, config_path: str | None, seed: int | None, threads: int | None):
        self.values = dict(_DEFAULTS)
        self.values.update(_load_config_file(config_path))
        if seed is not None:
            self.values["seed"] = seed
        if threads is not None:
            self.values["threads"] = threads

    def get(self, key, override=None):
        return self.values[key] if override is None else override

    def experiment_config(self, **overrides) -> harness.ExperimentConfig:
        merged = {k: self.values[k] for k in (
            "strategy", "train_fraction", "run_count", "seed", "dropout",
            "learning_rate", "batch_size", "epochs", "intermediate_hidden",
            "branch_hidden", "combiner_hidden",
        )}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return harness.ExperimentConfig(**merged)


@click.group()
@click.option("--seed", type=int, default=None, help="Global RNG seed.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file with defaults.")
@click.option("--threads", type=int, default=None, help="Worker threads for per-clip preprocessing.")
@click.pass_context
def cli(ctx, seed, config_path, threads):
    """Audiovisual fusion toolkit."""
    ctx.obj = Settings(config_path, seed, threads)


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _media_path(entry, manifest):
    return entry.media_path if entry.parent_id is None else manifest.by_id(entry.parent_id).media_path


@cli.command("prep-audio")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def prep_audio(settings, manifest_path, out_dir):
    """Decode WAVs, replay any audio augmentation, and write log-mel tensors."""
    manifest = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def process(entry):
        wave = resample_to_16k_mono(read_wav(_media_path(entry, manifest)))
        specs = aug.specs_for_entry(entry)
        if Modality.AUDIO in specs:
            wave = aug.augment_audio(wave, specs[Modality.AUDIO])
        logmel = logmel_from_waveform(wave)
        write_logmel(out / f"{entry.id}.avlm", entry.id, logmel)
        return entry.id

    done = _parallel_map(process, manifest.entries, settings.values["threads"])
    click.echo(f"wrote {len(done)} log-mel tensors to {out}")


def _load_frames_for(entry, manifest, frames_dir, decoder):
    source_id = entry.parent_id or entry.id
    base = Path(frames_dir)
    raw_dump = base / f"{source_id}.avrf"
    if raw_dump.exists():
        return read_raw_frames(raw_dump)
    frame_dir = base / source_id
    if frame_dir.is_dir():
        from PIL import Image

        paths = sorted(p for p in frame_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
        if not paths:
            raise MissingArtifacts(f"no frame images in {frame_dir}")
        frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8) for p in paths]
        return np.stack(frames)
    if decoder:
        with tempfile.TemporaryDirectory() as tmp:
            cmd = [part.format(input=_media_path(entry, manifest), outdir=tmp) for part in shlex.split(decoder)]
            subprocess.run(cmd, check=True)
            from PIL import Image

            paths = sorted(Path(tmp).iterdir())
            frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8) for p in paths]
            if not frames:
                raise MissingArtifacts(f"decoder produced no frames for {source_id}")
            return np.stack(frames)
    raise MissingArtifacts(f"no frames for clip {source_id} under {frames_dir}")


@cli.command("prep-video")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--frames-dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--frames", "frame_count", type=int, default=None, help="Frames per clip (default 32).")
@click.option("--decoder", default=None, help="External decoder command template with {input} and {outdir}.")
@click.pass_obj
def prep_video(settings, manifest_path, frames_dir, out_dir, frame_count, decoder):
    """Sample, crop, resize, and normalize frames into frame-stack tensors."""
    manifest = load_manifest(manifest_path)
    count = settings.get("frame_count", frame_count)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def process(entry):
        frames = _load_frames_for(entry, manifest, frames_dir, decoder)
        seq = RawFrameSequence(frames=frames, fps=25.0, clip_id=entry.id)
        stack = sample_frames(seq, count)
        specs = aug.specs_for_entry(entry)
        if Modality.VIDEO in specs:
            stack = aug.augment_video(stack, specs[Modality.VIDEO])
        write_framestack(out / f"{entry.id}.avfs", stack)
        return entry.id

    done = _parallel_map(process, manifest.entries, settings.values["threads"])
    click.echo(f"wrote {len(done)} frame stacks to {out}")


@cli.command("augment")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--copies", type=int, default=None, help="Augmented copies per clip (default 2).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-ops", type=int, default=None)
@click.option("--max-ops", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Overrides the global --seed.")
@click.pass_obj
def augment_cmd(settings, manifest_path, copies, out_path, min_ops, max_ops, seed):
    """Expand a manifest with randomly composed augmented entries."""
    manifest = load_manifest(manifest_path)
    policy = aug.AugmentationPolicy(
        copies_per_clip=settings.get("copies_per_clip", copies),
        min_ops=settings.get("min_ops", min_ops),
        max_ops=settings.get("max_ops", max_ops),
    )
    expanded = aug.expand_dataset(manifest, policy, seed=settings.get("seed", seed))
    save_manifest(expanded, out_path)
    click.echo(f"{len(manifest)} entries -> {len(expanded)} entries ({out_path})")


@cli.command("embed")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--modality", type=click.Choice(["audio", "video"]), required=True)
@click.option("--tensors", "tensor_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--encoder", type=click.Choice(["toy"]), default="toy", show_default=True)
@click.pass_obj
def embed_cmd(settings, manifest_path, modality, tensor_dir, out_path, encoder):
    """Run the deterministic toy encoders over prep outputs and write AVFE files."""
    manifest = load_manifest(manifest_path)
    tensor_dir = Path(tensor_dir)
    records = []
    if modality == "audio":
        enc = ToyAudioEncoder()
        for entry in manifest.entries:
            path = tensor_dir / f"{entry.id}.avlm"
            if not path.exists():
                raise MissingArtifacts(f"missing log-mel tensor {path}")
            clip_id, logmel = read_logmel(path)
            patches = np.stack([ex.patch for ex in frame_examples(logmel.astype(np.float64), clip_id)])
            vec = embed_clip(enc, patches)
            records.append(EmbeddingRecord(clip_id=entry.id, modality=Modality.AUDIO, values=vec.astype(np.float32)))
    else:
        enc = ToyVideoEncoder()
        for entry in manifest.entries:
            path = tensor_dir / f"{entry.id}.avfs"
            if not path.exists():
                raise MissingArtifacts(f"missing frame stack {path}")
            stack = read_framestack(path)
            vec = embed_clip(enc, stack.tensor)
            records.append(EmbeddingRecord(clip_id=entry.id, modality=Modality.VIDEO, values=vec.astype(np.float32)))
    write_embeddings(records, out_path)
    click.echo(f"wrote {len(records)} {modality} embeddings to {out_path}")


def _load_data(manifest_path, audio_emb, video_emb):
    return harness.load_experiment_data(manifest_path, audio_emb, video_emb)


@cli.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--audio-emb", required=True, type=click.Path())
@click.option("--video-emb", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(list(harness.STRATEGIES)), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Overrides the global --seed.")
@click.option("--out", "model_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_obj
def train_cmd(settings, manifest_path, audio_emb, video_emb, strategy, epochs, seed, model_path, report_path):
    """Split, train one fusion head, and write a checkpoint."""
    data = _load_data(manifest_path, audio_emb, video_emb)
    cfg = settings.experiment_config(strategy=strategy, epochs=epochs, seed=seed)
    assignment = random_split(data.manifest, seed=cfg.seed, train_fraction=cfg.train_fraction)
    manifest = with_split(data.manifest, assignment)
    train_idx = [i for i, e in enumerate(manifest.entries) if e.split == Split.TRAIN]
    val_idx = [i for i, e in enumerate(manifest.entries) if e.split == Split.VAL]
    X = np.concatenate([data.audio, data.video], axis=1)
    y = data.labels
    clf = FusionClassifier(
        strategy=cfg.strategy, audio_dim=data.audio_dim,
        intermediate_hidden=cfg.intermediate_hidden, branch_hidden=cfg.branch_hidden,
        combiner_hidden=cfg.combiner_hidden, dropout=cfg.dropout,
        learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
        epochs=cfg.epochs, seed=cfg.seed,
    )
    clf.fit(X[train_idx], y[train_idx])
    clf.save(model_path)
    train_res = harness.evaluate(clf, (data.audio[train_idx], data.video[train_idx]), y[train_idx])
    val_res = harness.evaluate(clf, (data.audio[val_idx], data.video[val_idx]), y[val_idx])
    summary = {
        "strategy": cfg.strategy,
        "train_accuracy": train_res.accuracy,
        "train_loss": train_res.mean_loss,
        "val_accuracy": val_res.accuracy,
        "val_loss": val_res.mean_loss,
        "confusion": val_res.confusion.tolist(),
    }
    if report_path:
        Path(report_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(summary, sort_keys=True))


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--audio-emb", required=True, type=click.Path())
@click.option("--video-emb", required=True, type=click.Path())
@click.option("--split", type=click.Choice(["train", "val", "all"]), default="all", show_default=True)
@click.pass_obj
def eval_cmd(settings, model_path, manifest_path, audio_emb, video_emb, split):
    """Evaluate a checkpoint; prints accuracy %, mean loss, and the confusion matrix."""
    data = _load_data(manifest_path, audio_emb, video_emb)
    clf = FusionClassifier.load(model_path)
    if split == "all":
        idx = list(range(len(data.manifest)))
    else:
        idx = [i for i, e in enumerate(data.manifest.entries) if e.split == Split(split)]
    res = harness.evaluate(clf, (data.audio[idx], data.video[idx]), data.labels[idx])
    click.echo(json.dumps({
        "accuracy": res.accuracy,
        "mean_loss": res.mean_loss,
        "confusion": res.confusion.tolist(),
        "count": len(idx),
    }, sort_keys=True))


@cli.command("compare")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--audio-emb", type=click.Path(), default=None)
@click.option("--video-emb", type=click.Path(), default=None)
@click.option("--synthetic", is_flag=True, help="Use the built-in Gaussian benchmark.")
@click.option("--clips-per-class", type=int, default=None, help="Benchmark size (default 500).")
@click.option("--epochs", type=int, default=None)
@click.option("--run-count", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Overrides the global --seed.")
@click.option("--out-dir", required=True, type=click.Path())
@click.pass_obj
def compare_cmd(settings, manifest_path, audio_emb, video_emb, synthetic, clips_per_class, epochs, run_count, seed, out_dir):
    """Run all five heads under identical data and seeds; write report.json/.txt."""
    cfg = settings.experiment_config(epochs=epochs, run_count=run_count, seed=seed)
    if synthetic:
        data = harness.make_synthetic_benchmark(n_per_class=clips_per_class or harness.BENCH_CLIPS_PER_CLASS, seed=cfg.seed)
    else:
        if not (manifest_path and audio_emb and video_emb):
            raise MissingArtifacts("compare needs --synthetic or all of --manifest/--audio-emb/--video-emb")
        data = _load_data(manifest_path, audio_emb, video_emb)
    report = harness.compare_strategies(cfg, data)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.render_text())
    click.echo(report.render_text(), nl=False)


@cli.command("search")
@click.option("--space", "space_path", required=True, type=click.Path(exists=True))
@click.option("--budget", type=int, required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--audio-emb", type=click.Path(), default=None)
@click.option("--video-emb", type=click.Path(), default=None)
@click.option("--synthetic", is_flag=True)
@click.option("--clips-per-class", type=int, default=None, help="Benchmark size for --synthetic (default 500).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def search_cmd(settings, space_path, budget, manifest_path, audio_emb, video_emb, synthetic, clips_per_class, out_path):
    """Random hyperparameter search; writes the winning config and all trials."""
    space = json.loads(Path(space_path).read_text(encoding="utf-8"))
    cfg = settings.experiment_config()
    if synthetic:
        data = harness.make_synthetic_benchmark(n_per_class=clips_per_class or harness.BENCH_CLIPS_PER_CLASS, seed=cfg.seed)
    else:
        if not (manifest_path and audio_emb and video_emb):
            raise MissingArtifacts("search needs --synthetic or all of --manifest/--audio-emb/--video-emb")
        data = _load_data(manifest_path, audio_emb, video_emb)
    best, trials = harness.random_search(space, budget, cfg, data)
    payload = {
        "best": _config_dict(best),
        "trials": [
            {"index": t.index, "ava": t.ava, "avl": t.avl, "config": _config_dict(t.config)}
            for t in trials
        ],
    }
    Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(payload["best"], sort_keys=True))


def _config_dict(cfg: harness.ExperimentConfig) -> dict:
    return {
        "strategy": cfg.strategy,
        "train_fraction": cfg.train_fraction,
        "run_count": cfg.run_count,
        "seed": cfg.seed,
        "dropout": cfg.dropout,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "intermediate_hidden": list(cfg.intermediate_hidden),
        "branch_hidden": list(cfg.branch_hidden),
        "combiner_hidden": list(cfg.combiner_hidden),
    }


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except AVFusionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    return 0


if __name__ == "__main__":
    main()
