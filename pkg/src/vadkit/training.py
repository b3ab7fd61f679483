"""Training orchestration: splits, class balancing, the epoch loop,
plateau callbacks, and repeated-trial evaluation.

Class balancing happens per epoch: the dominant normal class is capped
by sampling without replacement, every anomaly class is resampled with
replacement up to the largest post-cap class size, and the combined
roster is shuffled. Validation loss drives the callbacks: the learning
rate halves after lr_reduce_patience epochs without improvement,
training stops after early_stop_patience, and the parameters returned
are the ones from the best validation epoch, not the last one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .data import DatasetManifest, ManifestEntry
from .features import feature_cache_path, load_features
from .model import (AdamState, ArchConfig, ModelParams, adam_step, init_params,
                    loss_and_grads, model_forward, save_checkpoint)


class NumericsError(ArithmeticError):
    """Raised when training produces non-finite losses or gradients."""


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.15
    seed: int = 0
    stratify: bool = True

    def __post_init__(self):
        if not (0.0 <= self.test_fraction < 1.0):
            raise ValueError(f"test_fraction must lie in [0, 1), got {self.test_fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(manifest: DatasetManifest, spec: SplitSpec
                     ) -> tuple[DatasetManifest, DatasetManifest]:
    """Split into (train, test), preserving class ratios.

    Each class contributes round(test_fraction * n) test items (half
    rounds up), at least 1 and at most n - 1. Classes with fewer than
    two samples cannot be split and raise ValueError. Entry order inside
    each output follows the input manifest, so splits diff cleanly.
    """
    rng = np.random.default_rng(spec.seed)
    indexed = list(enumerate(manifest.entries))
    test_idx: set[int] = set()
    if spec.stratify:
        for class_name in manifest.class_names:
            members = [i for i, e in indexed if e.class_label == class_name]
            if not members:
                continue
            if len(members) < 2:
                raise ValueError(
                    f"class '{class_name}' has {len(members)} sample(s); "
                    "need at least 2 to split")
            want = _round_half_up(spec.test_fraction * len(members))
            want = min(max(want, 1), len(members) - 1)
            order = rng.permutation(len(members))
            test_idx.update(members[j] for j in order[:want])
    else:
        if len(indexed) < 2:
            raise ValueError("need at least 2 samples to split")
        want = _round_half_up(spec.test_fraction * len(indexed))
        want = min(max(want, 1), len(indexed) - 1)
        order = rng.permutation(len(indexed))
        test_idx.update(int(j) for j in order[:want])
    train = [e for i, e in indexed if i not in test_idx]
    test = [e for i, e in indexed if i in test_idx]
    return manifest.replace_entries(train), manifest.replace_entries(test)


def build_balanced_epoch(entries: Sequence[ManifestEntry],
                         class_names: Sequence[str],
                         cap_normal: int | None = None,
                         seed: int = 0,
                         normal_label: str = "Normal") -> list[ManifestEntry]:
    """Resample one epoch roster with balanced classes.

    The normal class is capped (without replacement) at cap_normal;
    anomaly classes are up-sampled with replacement to the largest
    post-cap class size. cap_normal of None means "size of the largest
    anomaly class". The roster is shuffled before returning.
    """
    rng = np.random.default_rng(seed)
    grouped: dict[str, list[ManifestEntry]] = {name: [] for name in class_names}
    for e in entries:
        grouped[e.class_label].append(e)
    for name, members in grouped.items():
        if not members:
            raise ValueError(f"class '{name}' has no samples to balance")

    anomaly_sizes = [len(m) for n, m in grouped.items() if n != normal_label]
    if cap_normal is None:
        cap_normal = max(anomaly_sizes) if anomaly_sizes else len(grouped[normal_label])
    if cap_normal < 1:
        raise ValueError(f"cap_normal must be >= 1, got {cap_normal}")

    post_cap = {name: (min(len(m), cap_normal) if name == normal_label else len(m))
                for name, m in grouped.items()}
    target = max(post_cap.values())

    roster: list[ManifestEntry] = []
    for name in class_names:
        members = grouped[name]
        if name == normal_label:
            take = min(len(members), cap_normal)
            order = rng.permutation(len(members))[:take]
            roster.extend(members[int(j)] for j in order)
        elif len(members) >= target:
            roster.extend(members)
        else:
            picks = rng.choice(len(members), size=target, replace=True)
            roster.extend(members[int(j)] for j in picks)
    order = rng.permutation(len(roster))
    return [roster[int(j)] for j in order]


def one_hot(label: str, class_names: Sequence[str]) -> np.ndarray:
    vec = np.zeros(len(class_names), dtype=np.float32)
    vec[list(class_names).index(label)] = 1.0
    return vec


@dataclass
class Batch:
    features: np.ndarray       # (B, T, D) float32
    valid_lengths: np.ndarray  # (B,) int64
    labels: np.ndarray         # (B, C) float32
    video_ids: list[str]


def _entry_cache_path(entry: ManifestEntry, cache_root: str | Path) -> Path:
    if entry.feature_path:
        return Path(entry.feature_path)
    return feature_cache_path(cache_root, entry.video_id)


def batch_iterator(entries: Sequence[ManifestEntry], batch_size: int,
                   cache_root: str | Path, class_names: Sequence[str]
                   ) -> Iterator[Batch]:
    """Load cached feature sequences in fixed-size batches (last one may
    be short). Raises FileNotFoundError naming the video whose cache is
    missing, and ValueError when sequence shapes disagree."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    for start in range(0, len(entries), batch_size):
        chunk = entries[start:start + batch_size]
        mats, valids, labels, ids = [], [], [], []
        for entry in chunk:
            path = _entry_cache_path(entry, cache_root)
            if not path.exists():
                raise FileNotFoundError(
                    f"feature cache missing for video '{entry.video_id}': {path}")
            seq = load_features(path)
            mats.append(seq.matrix)
            valids.append(seq.valid_length)
            labels.append(one_hot(entry.class_label, class_names))
            ids.append(entry.video_id)
        shapes = {m.shape for m in mats}
        if len(shapes) > 1:
            raise ValueError(f"inconsistent cached feature shapes: {sorted(shapes)}")
        yield Batch(np.stack(mats), np.asarray(valids, dtype=np.int64),
                    np.stack(labels), ids)


@dataclass(frozen=True)
class CallbackConfig:
    early_stop_patience: int = 8
    lr_reduce_patience: int = 3
    lr_reduce_factor: float = 0.5
    min_delta: float = 0.0

    def __post_init__(self):
        if self.early_stop_patience < 1 or self.lr_reduce_patience < 1:
            raise ValueError("patience values must be >= 1")
        if not (0.0 < self.lr_reduce_factor < 1.0):
            raise ValueError(f"lr_reduce_factor must lie in (0, 1), "
                             f"got {self.lr_reduce_factor}")
        if self.min_delta < 0.0:
            raise ValueError(f"min_delta must be >= 0, got {self.min_delta}")


@dataclass(frozen=True)
class EpochDecision:
    new_best: bool
    reduce_lr: bool
    stop: bool


class PlateauController:
    """Validation-loss bookkeeping for checkpointing, LR drops, and stopping.

    An epoch improves when its loss beats the best seen by more than
    min_delta. Both wait counters grow on non-improving epochs; the LR
    counter resets after firing a reduction, and any improvement resets
    both.
    """

    def __init__(self, config: CallbackConfig):
        self.config = config
        self.best_loss = math.inf
        self.lr_wait = 0
        self.stop_wait = 0

    def observe(self, val_loss: float) -> EpochDecision:
        if val_loss < self.best_loss - self.config.min_delta:
            self.best_loss = val_loss
            self.lr_wait = 0
            self.stop_wait = 0
            return EpochDecision(new_best=True, reduce_lr=False, stop=False)
        self.lr_wait += 1
        self.stop_wait += 1
        reduce_lr = self.lr_wait >= self.config.lr_reduce_patience
        if reduce_lr:
            self.lr_wait = 0
        stop = self.stop_wait >= self.config.early_stop_patience
        return EpochDecision(new_best=False, reduce_lr=reduce_lr, stop=stop)


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["epoch,train_loss,train_accuracy,val_loss,val_accuracy,learning_rate"]
        for i, epoch in enumerate(self.epochs):
            lines.append(f"{epoch},{self.train_loss[i]!r},{self.train_accuracy[i]!r},"
                         f"{self.val_loss[i]!r},{self.val_accuracy[i]!r},"
                         f"{self.learning_rate[i]!r}")
        path.write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-4
    val_fraction: float = 0.15
    cap_normal: int | None = None
    seed: int = 0
    callbacks: CallbackConfig = CallbackConfig()

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ValueError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")


@dataclass
class EvalOutcome:
    loss: float
    accuracy: float
    y_true: np.ndarray   # (N,) int64 class indices
    y_pred: np.ndarray   # (N,) int64
    probs: np.ndarray    # (N, C) float64
    video_ids: list[str]


def evaluate_model(params: ModelParams, entries: Sequence[ManifestEntry],
                   cache_root: str | Path, class_names: Sequence[str],
                   batch_size: int = 32) -> EvalOutcome:
    """Inference-mode loss and accuracy over a set of cached sequences."""
    from .model.network import cross_entropy_loss  # local to avoid cycle noise

    names = list(class_names)
    y_true, y_pred, rows, ids = [], [], [], []
    total_loss = 0.0
    for batch in batch_iterator(entries, batch_size, cache_root, names):
        for j in range(batch.features.shape[0]):
            probs = model_forward(batch.features[j], int(batch.valid_lengths[j]),
                                  params, training=False)
            total_loss += cross_entropy_loss(batch.labels[j], probs, params)
            y_true.append(int(np.argmax(batch.labels[j])))
            y_pred.append(int(np.argmax(probs)))
            rows.append(np.asarray(probs, dtype=np.float64))
        ids.extend(batch.video_ids)
    if not rows:
        raise ValueError("cannot evaluate on an empty entry list")
    n = len(rows)
    y_true_arr = np.asarray(y_true, dtype=np.int64)
    y_pred_arr = np.asarray(y_pred, dtype=np.int64)
    return EvalOutcome(loss=total_loss / n,
                       accuracy=float((y_true_arr == y_pred_arr).mean()),
                       y_true=y_true_arr, y_pred=y_pred_arr,
                       probs=np.vstack(rows), video_ids=ids)


@dataclass
class TrainResult:
    params: ModelParams
    history: TrainHistory
    val_entries: tuple[ManifestEntry, ...]
    best_val_loss: float


def train(train_manifest: DatasetManifest, cache_root: str | Path,
          arch: ArchConfig, trainer: TrainerConfig,
          checkpoint_path: str | Path | None = None,
          initial_params: ModelParams | None = None) -> TrainResult:
    """Fit the classifier and return the best-validation-epoch parameters.

    val_fraction carves a stratified validation set out of the training
    manifest; a fraction of 0 validates on the training set itself
    (useful for deliberate overfitting checks). A checkpoint_path, when
    given, is rewritten at every new validation-loss minimum.
    """
    names = train_manifest.class_names
    if trainer.val_fraction > 0:
        fit_manifest, val_manifest = stratified_split(
            train_manifest, SplitSpec(trainer.val_fraction, trainer.seed))
        fit_entries = list(fit_manifest.entries)
        val_entries = list(val_manifest.entries)
    else:
        fit_entries = list(train_manifest.entries)
        val_entries = list(train_manifest.entries)

    params = initial_params.copy() if initial_params is not None \
        else init_params(arch, seed=trainer.seed)
    adam = AdamState.init_like(params, learning_rate=trainer.learning_rate)
    controller = PlateauController(trainer.callbacks)
    history = TrainHistory()
    best_params = params.copy()
    best_val_loss = math.inf
    seed_root = np.random.SeedSequence(trainer.seed)
    epoch_seeds = seed_root.generate_state(trainer.epochs + 1, dtype=np.uint64)
    dropout_counter = 0

    for epoch in range(1, trainer.epochs + 1):
        roster = build_balanced_epoch(fit_entries, names,
                                      cap_normal=trainer.cap_normal,
                                      seed=int(epoch_seeds[epoch]))
        lr_this_epoch = adam.learning_rate
        for batch_index, batch in enumerate(
                batch_iterator(roster, trainer.batch_size, cache_root, names)):
            grad_sum: dict[str, np.ndarray] = {}
            batch_loss = 0.0
            size = batch.features.shape[0]
            for j in range(size):
                dropout_counter += 1
                loss, grads = loss_and_grads(
                    batch.features[j], int(batch.valid_lengths[j]),
                    batch.labels[j], params, training=True,
                    seed=dropout_counter)
                batch_loss += loss
                for name, g in grads.items():
                    if name in grad_sum:
                        grad_sum[name] += g
                    else:
                        grad_sum[name] = g.astype(np.float64)
            if not math.isfinite(batch_loss):
                raise NumericsError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}")
            scale = 1.0 / size
            mean_grads = {name: g * scale for name, g in grad_sum.items()}
            for name, g in mean_grads.items():
                if not np.isfinite(g).all():
                    raise NumericsError(
                        f"non-finite gradient '{name}' at epoch {epoch}, "
                        f"batch {batch_index}")
            adam_step(params, mean_grads, adam)

        train_eval = evaluate_model(params, fit_entries, cache_root, names,
                                    trainer.batch_size)
        val_eval = evaluate_model(params, val_entries, cache_root, names,
                                  trainer.batch_size)
        history.epochs.append(epoch)
        history.train_loss.append(train_eval.loss)
        history.train_accuracy.append(train_eval.accuracy)
        history.val_loss.append(val_eval.loss)
        history.val_accuracy.append(val_eval.accuracy)
        history.learning_rate.append(lr_this_epoch)

        decision = controller.observe(val_eval.loss)
        if decision.new_best:
            best_params = params.copy()
            best_val_loss = val_eval.loss
            history.best_epoch = epoch
            if checkpoint_path is not None:
                save_checkpoint(best_params, checkpoint_path)
        if decision.reduce_lr:
            adam.learning_rate *= trainer.callbacks.lr_reduce_factor
        if decision.stop:
            break

    return TrainResult(params=best_params, history=history,
                       val_entries=tuple(val_entries),
                       best_val_loss=best_val_loss)


@dataclass(frozen=True)
class TrialsSummary:
    accuracies: tuple[float, ...]
    losses: tuple[float, ...]
    mean_accuracy: float
    std_accuracy_sample: float
    std_accuracy_population: float
    mean_loss: float

    def describe(self) -> str:
        accs = ", ".join(f"{a * 100:.2f}" for a in self.accuracies)
        return (f"trials: [{accs}] %\n"
                f"mean accuracy: {self.mean_accuracy * 100:.2f} %\n"
                f"std (sample): {self.std_accuracy_sample * 100:.2f}\n"
                f"std (population): {self.std_accuracy_population * 100:.2f}\n"
                f"mean loss: {self.mean_loss:.2f}")


def summarize_trials(accuracies: Sequence[float],
                     losses: Sequence[float]) -> TrialsSummary:
    """Mean and spread over repeated runs; both std conventions reported
    (n-1 and n denominators) since a handful of trials makes the
    difference material."""
    if not accuracies or len(accuracies) != len(losses):
        raise ValueError("need equally many accuracies and losses, at least one each")
    acc = np.asarray(accuracies, dtype=np.float64)
    los = np.asarray(losses, dtype=np.float64)
    sample_std = float(acc.std(ddof=1)) if len(acc) > 1 else 0.0
    return TrialsSummary(
        accuracies=tuple(float(a) for a in acc),
        losses=tuple(float(x) for x in los),
        mean_accuracy=float(acc.mean()),
        std_accuracy_sample=sample_std,
        std_accuracy_population=float(acc.std(ddof=0)),
        mean_loss=float(los.mean()),
    )


@dataclass
class TrialOutcome:
    seed: int
    test_accuracy: float
    test_loss: float
    result: TrainResult
    test_entries: tuple[ManifestEntry, ...]


def run_trials(manifest: DatasetManifest, cache_root: str | Path,
               arch: ArchConfig, trainer: TrainerConfig,
               split: SplitSpec | None = None,
               num_trials: int = 3, seeds: Iterable[int] | None = None,
               checkpoint_dir: str | Path | None = None
               ) -> tuple[list[TrialOutcome], TrialsSummary]:
    """Repeat split / train / test num_trials times with fresh seeds."""
    split = split or SplitSpec()
    seed_list = list(seeds) if seeds is not None else \
        [trainer.seed + i for i in range(num_trials)]
    if not seed_list:
        raise ValueError("need at least one trial seed")
    outcomes = []
    for trial_index, seed in enumerate(seed_list):
        train_manifest, test_manifest = stratified_split(
            manifest, replace(split, seed=seed))
        trial_trainer = replace(trainer, seed=seed)
        ckpt = None
        if checkpoint_dir is not None:
            ckpt = Path(checkpoint_dir) / f"trial_{trial_index}.seqc"
        result = train(train_manifest, cache_root, arch, trial_trainer,
                       checkpoint_path=ckpt)
        test_eval = evaluate_model(result.params, list(test_manifest.entries),
                                   cache_root, manifest.class_names)
        outcomes.append(TrialOutcome(seed=seed, test_accuracy=test_eval.accuracy,
                                     test_loss=test_eval.loss, result=result,
                                     test_entries=tuple(test_manifest.entries)))
    summary = summarize_trials([o.test_accuracy for o in outcomes],
                               [o.test_loss for o in outcomes])
    return outcomes, summary
