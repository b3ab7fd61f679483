"""Pipeline stages with content-addressed caching.

Stages communicate only through files. Before running, a stage
fingerprints its inputs (sha-256 of file contents) together with the
parameters that affect it; the fingerprint and output list land in
out_root/stage_state/<stage>.json. A re-run with an unchanged
fingerprint and intact outputs is skipped. A stage whose inputs are
missing fails with the name of the stage that should have produced
them.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, PipelineConfig
from .data import (DatasetManifest, ManifestEntry, list_frame_files,
                   load_frame, load_manifest, load_video_frames,
                   read_detections, read_track_log, save_frame, save_manifest,
                   write_track_log)
from .features import (extract_features, feature_cache_path, make_adapter,
                       store_features)
from .metrics import auc, averaged_metrics, confusion_matrix, overall_accuracy, per_class_metrics
from .model import load_checkpoint
from .report import build_report, render_report
from .sampling import ClipTensor, assemble_clip
from .suppress import suppress_video
from .tracking import track_video
from .training import (TrainHistory, TrialsSummary, evaluate_model, run_trials,
                       stratified_split, train)

STAGE_ORDER = ("track", "suppress", "sample", "extract", "split",
               "train", "trials", "evaluate", "report")


class MissingInputError(RuntimeError):
    """An input file another stage should have produced is absent."""

    def __init__(self, message: str, producer: str | None = None):
        if producer:
            message = f"{message} (run the '{producer}' stage first)"
        super().__init__(message)
        self.producer = producer


@dataclass
class StageResult:
    name: str
    status: str  # "ran" | "up-to-date" | "would-run"
    outputs: list[Path]


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _fingerprint(name: str, inputs: Sequence[Path], params: dict) -> str:
    digest = hashlib.sha256()
    digest.update(name.encode())
    digest.update(json.dumps(params, sort_keys=True, separators=(",", ":"),
                             default=str).encode())
    for path in sorted(inputs):
        digest.update(str(path).encode())
        digest.update(_sha256_file(path).encode())
    return digest.hexdigest()


def _state_path(cfg: PipelineConfig, name: str) -> Path:
    return Path(cfg.out_root) / "stage_state" / f"{name}.json"


def _require_manifest(cfg: PipelineConfig) -> tuple[Path, DatasetManifest]:
    if not cfg.manifest:
        raise ConfigError("no manifest configured (set 'manifest')")
    path = Path(cfg.manifest)
    if not path.exists():
        raise MissingInputError(f"manifest not found: {path}")
    return path, load_manifest(path, cfg.class_names)


def _frame_dir(manifest_path: Path, entry: ManifestEntry) -> Path:
    raw = Path(entry.frame_dir)
    return raw if raw.is_absolute() else manifest_path.parent / raw


def _detections_path(cfg: PipelineConfig, video_id: str) -> Path:
    if not cfg.detections_root:
        raise ConfigError("no detection logs configured (set 'detections_root')")
    return Path(cfg.detections_root) / f"{video_id}.txt"


def _out(cfg: PipelineConfig, *parts: str) -> Path:
    return Path(cfg.out_root).joinpath(*parts)


def _parallel(jobs: int, fn: Callable, items: Sequence) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---- track -----------------------------------------------------------------


def _track_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    inputs = [manifest_path]
    frame_counts = {}
    for entry in manifest:
        det_path = _detections_path(cfg, entry.video_id)
        if not det_path.exists():
            raise MissingInputError(f"detection log not found: {det_path}")
        inputs.append(det_path)
        frame_counts[entry.video_id] = len(list_frame_files(
            _frame_dir(manifest_path, entry)))
    params = {"assoc": vars(cfg.association_params()),
              "separator": cfg.log_separator,
              "frame_counts": frame_counts}
    return inputs, params, manifest_path, manifest


def _track_run(cfg: PipelineConfig, jobs: int) -> list[Path]:
    _inputs, params, manifest_path, manifest = _track_plan(cfg)
    assoc = cfg.association_params()
    sep = cfg.separator()

    def one(entry: ManifestEntry) -> Path:
        per_frame = read_detections(_detections_path(cfg, entry.video_id),
                                    params["frame_counts"][entry.video_id])
        records = track_video(per_frame, assoc)
        out_path = _out(cfg, "tracks", f"{entry.video_id}.txt")
        write_track_log(records, out_path, sep=sep)
        return out_path

    return _parallel(jobs, one, list(manifest))


# ---- suppress ---------------------------------------------------------------


def _suppress_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    inputs = [manifest_path]
    for entry in manifest:
        log_path = _out(cfg, "tracks", f"{entry.video_id}.txt")
        if not log_path.exists():
            raise MissingInputError(f"track log not found: {log_path}", producer="track")
        inputs.append(log_path)
        inputs.extend(list_frame_files(_frame_dir(manifest_path, entry)))
    params = {"suppress": vars(cfg.suppression_params())}
    return inputs, params, manifest_path, manifest


def _suppress_run(cfg: PipelineConfig, jobs: int) -> list[Path]:
    _inputs, _params, manifest_path, manifest = _suppress_plan(cfg)
    sup = cfg.suppression_params()

    def one(entry: ManifestEntry) -> list[Path]:
        frame_files = list_frame_files(_frame_dir(manifest_path, entry))
        frames = [load_frame(p) for p in frame_files]
        records = read_track_log(_out(cfg, "tracks", f"{entry.video_id}.txt"))
        suppressed = suppress_video(frames, records, sup)
        out_paths = []
        for src, frame in zip(frame_files, suppressed):
            out_path = _out(cfg, "suppressed", entry.video_id, src.name)
            save_frame(frame, out_path)
            out_paths.append(out_path)
        return out_paths

    nested = _parallel(jobs, one, list(manifest))
    return [p for group in nested for p in group]


# ---- sample -----------------------------------------------------------------


def _sample_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    inputs = [manifest_path]
    for entry in manifest:
        video_dir = _out(cfg, "suppressed", entry.video_id)
        if not video_dir.is_dir():
            raise MissingInputError(f"suppressed frames not found: {video_dir}",
                                    producer="suppress")
        inputs.extend(list_frame_files(video_dir))
    params = {"sampler": vars(cfg.sampler_params())}
    return inputs, params, manifest_path, manifest


def _sample_run(cfg: PipelineConfig, jobs: int) -> list[Path]:
    _inputs, _params, _manifest_path, manifest = _sample_plan(cfg)
    sampler = cfg.sampler_params()

    def one(entry: ManifestEntry) -> Path:
        frames = load_video_frames(_out(cfg, "suppressed", entry.video_id))
        clip = assemble_clip(frames, sampler)
        out_path = _out(cfg, "clips", f"{entry.video_id}.npz")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(out_path, clip=clip.frames,
                 valid_length=np.int64(clip.valid_length))
        return out_path

    return _parallel(jobs, one, list(manifest))


def load_clip(path: Path) -> ClipTensor:
    with np.load(path) as blob:
        return ClipTensor(blob["clip"], int(blob["valid_length"]))


# ---- extract ----------------------------------------------------------------


def _extract_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    inputs = [manifest_path]
    for entry in manifest:
        clip_path = _out(cfg, "clips", f"{entry.video_id}.npz")
        if not clip_path.exists():
            raise MissingInputError(f"clip tensor not found: {clip_path}",
                                    producer="sample")
        inputs.append(clip_path)
    params = {"adapter": cfg.adapter, "feature_dim": cfg.feature_dim,
              "adapter_seed": cfg.adapter_seed, "onnx_model": cfg.onnx_model}
    return inputs, params, manifest_path, manifest


def _extract_run(cfg: PipelineConfig, jobs: int) -> list[Path]:
    _inputs, _params, _manifest_path, manifest = _extract_plan(cfg)
    adapter = make_adapter(cfg.adapter, output_dim=cfg.feature_dim,
                           seed=cfg.adapter_seed,
                           model_path=cfg.onnx_model or None)
    cache_root = cfg.resolved_cache_root()

    def one(entry: ManifestEntry) -> Path:
        clip = load_clip(_out(cfg, "clips", f"{entry.video_id}.npz"))
        seq = extract_features(clip, adapter, video_id=entry.video_id,
                               label=entry.class_label)
        out_path = feature_cache_path(cache_root, entry.video_id)
        store_features(seq, out_path)
        return out_path

    return _parallel(jobs, one, list(manifest))


# ---- split ------------------------------------------------------------------


def _split_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    params = {"test_fraction": cfg.test_fraction, "seed": cfg.seed,
              "class_names": list(cfg.class_names)}
    return [manifest_path], params, manifest_path, manifest


def _split_run(cfg: PipelineConfig, _jobs: int) -> list[Path]:
    _inputs, _params, _manifest_path, manifest = _split_plan(cfg)
    train_m, test_m = stratified_split(manifest, cfg.split_spec())
    train_path = _out(cfg, "splits", "train.csv")
    test_path = _out(cfg, "splits", "test.csv")
    save_manifest(train_m, train_path)
    save_manifest(test_m, test_path)
    return [train_path, test_path]


# ---- train ------------------------------------------------------------------


def _training_inputs(cfg: PipelineConfig, manifest: DatasetManifest,
                     producer: str = "extract") -> list[Path]:
    cache_root = cfg.resolved_cache_root()
    inputs = []
    for entry in manifest:
        cache = feature_cache_path(cache_root, entry.video_id)
        if not cache.exists():
            raise MissingInputError(
                f"feature cache missing for video '{entry.video_id}': {cache}",
                producer=producer)
        inputs.append(cache)
    return inputs


def _arch_trainer_params(cfg: PipelineConfig) -> dict:
    arch = vars(cfg.arch_config()).copy()
    trainer = {"epochs": cfg.epochs, "batch_size": cfg.batch_size,
               "learning_rate": cfg.learning_rate, "val_fraction": cfg.val_fraction,
               "cap_normal": cfg.cap_normal, "seed": cfg.seed,
               "early_stop_patience": cfg.early_stop_patience,
               "lr_reduce_patience": cfg.lr_reduce_patience,
               "lr_reduce_factor": cfg.lr_reduce_factor}
    return {"arch": arch, "trainer": trainer}


def _train_plan(cfg: PipelineConfig):
    train_path = _out(cfg, "splits", "train.csv")
    if not train_path.exists():
        raise MissingInputError(f"train split not found: {train_path}",
                                producer="split")
    manifest = load_manifest(train_path, cfg.class_names)
    inputs = [train_path] + _training_inputs(cfg, manifest)
    return inputs, _arch_trainer_params(cfg), train_path, manifest


def _train_run(cfg: PipelineConfig, _jobs: int) -> list[Path]:
    _inputs, _params, _train_path, manifest = _train_plan(cfg)
    checkpoint = _out(cfg, "model", "checkpoint.seqc")
    result = train(manifest, cfg.resolved_cache_root(), cfg.arch_config(),
                   cfg.trainer_config(), checkpoint_path=checkpoint)
    history_path = _out(cfg, "model", "history.csv")
    result.history.to_csv(history_path)
    meta_path = _out(cfg, "model", "train_meta.json")
    _write_json({"best_epoch": result.history.best_epoch,
                 "best_val_loss": result.best_val_loss,
                 "epochs_run": len(result.history.epochs)}, meta_path)
    return [checkpoint, history_path, meta_path]


# ---- trials -----------------------------------------------------------------


def _trials_plan(cfg: PipelineConfig):
    manifest_path, manifest = _require_manifest(cfg)
    inputs = [manifest_path] + _training_inputs(cfg, manifest)
    params = _arch_trainer_params(cfg)
    params["num_trials"] = cfg.num_trials
    params["trial_seeds"] = list(cfg.trial_seeds)
    params["test_fraction"] = cfg.test_fraction
    return inputs, params, manifest_path, manifest


def _trials_run(cfg: PipelineConfig, _jobs: int) -> list[Path]:
    _inputs, _params, _manifest_path, manifest = _trials_plan(cfg)
    seeds = list(cfg.trial_seeds) or None
    outcomes, summary = run_trials(
        manifest, cfg.resolved_cache_root(), cfg.arch_config(),
        cfg.trainer_config(), split=cfg.split_spec(),
        num_trials=cfg.num_trials, seeds=seeds,
        checkpoint_dir=_out(cfg, "trials"))
    summary_json = _out(cfg, "trials", "summary.json")
    _write_json({"seeds": [o.seed for o in outcomes],
                 "accuracies": list(summary.accuracies),
                 "losses": list(summary.losses),
                 "mean_accuracy": summary.mean_accuracy,
                 "std_accuracy_sample": summary.std_accuracy_sample,
                 "std_accuracy_population": summary.std_accuracy_population,
                 "mean_loss": summary.mean_loss}, summary_json)
    summary_md = _out(cfg, "trials", "summary.md")
    summary_md.write_text(summary.describe() + "\n")
    return [summary_json, summary_md]


# ---- evaluate ---------------------------------------------------------------


def _evaluate_plan(cfg: PipelineConfig):
    checkpoint = Path(cfg.eval_checkpoint) if cfg.eval_checkpoint \
        else _out(cfg, "model", "checkpoint.seqc")
    if not checkpoint.exists():
        raise MissingInputError(f"model checkpoint not found: {checkpoint}",
                                producer="train")
    test_path = Path(cfg.eval_manifest) if cfg.eval_manifest \
        else _out(cfg, "splits", "test.csv")
    if not test_path.exists():
        raise MissingInputError(f"test split not found: {test_path}",
                                producer="split")
    manifest = load_manifest(test_path, cfg.class_names)
    inputs = [checkpoint, test_path] + _training_inputs(cfg, manifest)
    params = {"class_names": list(cfg.class_names)}
    return inputs, params, (checkpoint, test_path), manifest


def _evaluate_run(cfg: PipelineConfig, _jobs: int) -> list[Path]:
    _inputs, _params, (checkpoint, _test_path), manifest = _evaluate_plan(cfg)
    params = load_checkpoint(checkpoint)
    outcome = evaluate_model(params, list(manifest.entries),
                             cfg.resolved_cache_root(), cfg.class_names)
    names = cfg.class_names

    pred_path = _out(cfg, "eval", "predictions.csv")
    pred_path.parent.mkdir(parents=True, exist_ok=True)
    header = "video_id,true_label,predicted_label," + \
        ",".join(f"prob_{n}" for n in names)
    lines = [header]
    for i, vid in enumerate(outcome.video_ids):
        probs = ",".join(repr(float(p)) for p in outcome.probs[i])
        lines.append(f"{vid},{names[outcome.y_true[i]]},"
                     f"{names[outcome.y_pred[i]]},{probs}")
    pred_path.write_text("\n".join(lines) + "\n")

    cm = confusion_matrix(outcome.y_true, outcome.y_pred, len(names))
    per_class = per_class_metrics(cm)
    averages = averaged_metrics(per_class)
    bundle = build_report(outcome.y_true, outcome.y_pred, outcome.probs, names)
    aucs = {}
    for name in names:
        if name in bundle.curves:
            aucs[name] = {"roc": auc(bundle.curves[name]["roc"]),
                          "pr": auc(bundle.curves[name]["pr"])}
    metrics_path = _out(cfg, "eval", "metrics.json")
    _write_json({
        "samples": int(cm.sum()),
        "accuracy": overall_accuracy(cm),
        "loss": outcome.loss,
        "confusion_matrix": cm.tolist(),
        "per_class": {
            names[c]: {"accuracy": m.accuracy, "precision": m.precision,
                       "recall": m.recall, "specificity": m.specificity,
                       "f1": m.f1, "support": m.support,
                       "degenerate": sorted(m.degenerate)}
            for c, m in enumerate(per_class)},
        "averages": vars(averages).copy(),
        "auc": aucs,
    }, metrics_path)
    return [pred_path, metrics_path]


# ---- report -----------------------------------------------------------------


def _read_predictions(path: Path, class_names: Sequence[str]):
    lines = path.read_text().splitlines()
    if not lines:
        raise MissingInputError(f"empty predictions file: {path}")
    header = lines[0].split(",")
    expected = ["video_id", "true_label", "predicted_label"] + \
        [f"prob_{n}" for n in class_names]
    if header != expected:
        raise ValueError(f"{path}: unexpected predictions header")
    index = {name: i for i, name in enumerate(class_names)}
    y_true, y_pred, probs = [], [], []
    for line in lines[1:]:
        parts = line.split(",")
        y_true.append(index[parts[1]])
        y_pred.append(index[parts[2]])
        probs.append([float(p) for p in parts[3:]])
    return np.asarray(y_true), np.asarray(y_pred), np.asarray(probs)


def _report_plan(cfg: PipelineConfig):
    pred_path = _out(cfg, "eval", "predictions.csv")
    if not pred_path.exists():
        raise MissingInputError(f"predictions not found: {pred_path}",
                                producer="evaluate")
    inputs = [pred_path]
    history_path = _out(cfg, "model", "history.csv")
    if history_path.exists():
        inputs.append(history_path)
    trials_path = _out(cfg, "trials", "summary.json")
    if trials_path.exists():
        inputs.append(trials_path)
    params = {"class_names": list(cfg.class_names)}
    return inputs, params, (pred_path, history_path, trials_path), None


def _read_history_csv(path: Path) -> TrainHistory:
    history = TrainHistory()
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        epoch, tl, ta, vl, va, lr = line.split(",")
        history.epochs.append(int(epoch))
        history.train_loss.append(float(tl))
        history.train_accuracy.append(float(ta))
        history.val_loss.append(float(vl))
        history.val_accuracy.append(float(va))
        history.learning_rate.append(float(lr))
    return history


def _report_run(cfg: PipelineConfig, _jobs: int) -> list[Path]:
    _inputs, _params, (pred_path, history_path, trials_path), _m = _report_plan(cfg)
    y_true, y_pred, probs = _read_predictions(pred_path, cfg.class_names)
    history = _read_history_csv(history_path) if history_path.exists() else None
    summary = None
    if trials_path.exists():
        blob = json.loads(trials_path.read_text())
        summary = TrialsSummary(
            accuracies=tuple(blob["accuracies"]), losses=tuple(blob["losses"]),
            mean_accuracy=blob["mean_accuracy"],
            std_accuracy_sample=blob["std_accuracy_sample"],
            std_accuracy_population=blob["std_accuracy_population"],
            mean_loss=blob["mean_loss"])
    bundle = build_report(y_true, y_pred, probs, cfg.class_names,
                          trial_summary=summary, history=history)
    return render_report(bundle, _out(cfg, "report"))


# ---- framework --------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    name: str
    plan: Callable
    run: Callable


_STAGES = {
    "track": Stage("track", _track_plan, _track_run),
    "suppress": Stage("suppress", _suppress_plan, _suppress_run),
    "sample": Stage("sample", _sample_plan, _sample_run),
    "extract": Stage("extract", _extract_plan, _extract_run),
    "split": Stage("split", _split_plan, _split_run),
    "train": Stage("train", _train_plan, _train_run),
    "trials": Stage("trials", _trials_plan, _trials_run),
    "evaluate": Stage("evaluate", _evaluate_plan, _evaluate_run),
    "report": Stage("report", _report_plan, _report_run),
}


def run_stage(name: str, cfg: PipelineConfig, force: bool = False,
              dry_run: bool = False, jobs: int | None = None) -> StageResult:
    """Run (or skip) one stage; see module docstring for the caching rule."""
    if name not in _STAGES:
        raise ConfigError(f"unknown stage '{name}', choose from {STAGE_ORDER}")
    stage = _STAGES[name]
    inputs, params, *_rest = stage.plan(cfg)
    fingerprint = _fingerprint(name, inputs, params)
    state_file = _state_path(cfg, name)

    if not force and state_file.exists():
        state = json.loads(state_file.read_text())
        outputs = [Path(p) for p in state.get("outputs", [])]
        if state.get("fingerprint") == fingerprint and \
                outputs and all(p.exists() for p in outputs):
            return StageResult(name, "up-to-date", outputs)

    if dry_run:
        return StageResult(name, "would-run", [])

    outputs = stage.run(cfg, jobs if jobs is not None else cfg.jobs)
    state_file.parent.mkdir(parents=True, exist_ok=True)
    state_file.write_text(json.dumps(
        {"fingerprint": fingerprint, "outputs": [str(p) for p in outputs]},
        indent=2, sort_keys=True) + "\n")
    return StageResult(name, "ran", outputs)


def run_pipeline(cfg: PipelineConfig, force: bool = False, dry_run: bool = False,
                 jobs: int | None = None,
                 stages: Sequence[str] = STAGE_ORDER) -> list[StageResult]:
    """Run the given stages in pipeline order."""
    ordered = [s for s in STAGE_ORDER if s in stages]
    unknown = set(stages) - set(STAGE_ORDER)
    if unknown:
        raise ConfigError(f"unknown stages: {sorted(unknown)}")
    results = []
    for name in ordered:
        result = run_stage(name, cfg, force=force, dry_run=dry_run, jobs=jobs)
        results.append(result)
        if dry_run and result.status == "would-run":
            # downstream fingerprints depend on files this stage would write
            break
    return results
