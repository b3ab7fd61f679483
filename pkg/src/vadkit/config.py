"""Pipeline configuration.

Precedence, lowest to highest: built-in defaults, config file, process
environment (VADKIT_<KEY>), explicit overrides (CLI flags). The file
format is flat ``key = value`` lines with # comments. Unknown keys in a
file or override mapping are errors; unrelated VADKIT_* environment
variables (such as the acceleration switch) are ignored.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .data import DEFAULT_CLASSES
from .model.config import ArchConfig, preset
from .sampling import SamplerParams
from .suppress import SuppressionParams
from .tracking.tracker import AssociationParams
from .training import CallbackConfig, SplitSpec, TrainerConfig

ENV_PREFIX = "VADKIT_"


class ConfigError(ValueError):
    """Raised for unknown keys, unparsable values, or invalid settings."""


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_str(text: str) -> str:
    return text


def _parse_opt_int(text: str) -> int | None:
    return None if text == "" else int(text)


def _parse_opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def _parse_names(text: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    if not names:
        raise ValueError("empty class list")
    return names


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in text.split(",") if p.strip())


@dataclass(frozen=True)
class PipelineConfig:
    # paths
    manifest: str = ""
    detections_root: str = ""
    out_root: str = "out"
    cache_root: str = ""  # empty: <out_root>/features
    # tracker
    high_conf_threshold: float = 0.6
    low_conf_threshold: float = 0.1
    iou_gate_stage1: float = 0.3
    iou_gate_stage2: float = 0.5
    max_coast_frames: int = 30
    min_hits_to_confirm: int = 3
    # suppression
    margin: int = 30
    kernel_size: int = 51
    sigma: float = 0.0
    # sampling
    clip_length: int = 32
    target_height: int = 299
    target_width: int = 224
    preprocess: str = "backbone_scaling"
    # features
    adapter: str = "mock"
    feature_dim: int = 2048
    adapter_seed: int = 2024
    onnx_model: str = ""
    # splits
    test_fraction: float = 0.15
    val_fraction: float = 0.15
    # architecture
    arch_preset: str = "bilstm"
    rnn1_units: int | None = None
    rnn2_units: int | None = None
    dense_units: int | None = None
    dropout1: float | None = None
    dropout2: float | None = None
    l2_lambda: float | None = None
    input_dropout: float | None = None
    recurrent_dropout: float | None = None
    # training
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-4
    cap_normal: int | None = None
    early_stop_patience: int = 8
    lr_reduce_patience: int = 3
    lr_reduce_factor: float = 0.5
    # trials
    num_trials: int = 3
    trial_seeds: tuple[int, ...] = ()
    # evaluation (empty: derive from out_root)
    eval_checkpoint: str = ""
    eval_manifest: str = ""
    # global
    seed: int = 0
    jobs: int = 1
    class_names: tuple[str, ...] = DEFAULT_CLASSES
    log_separator: str = "space"  # or "comma"

    # ---- derived parameter bundles -------------------------------------

    def association_params(self) -> AssociationParams:
        return AssociationParams(
            high_conf_threshold=self.high_conf_threshold,
            low_conf_threshold=self.low_conf_threshold,
            iou_gate_stage1=self.iou_gate_stage1,
            iou_gate_stage2=self.iou_gate_stage2,
            max_coast_frames=self.max_coast_frames,
            min_hits_to_confirm=self.min_hits_to_confirm,
        )

    def suppression_params(self) -> SuppressionParams:
        return SuppressionParams(margin=self.margin, kernel_size=self.kernel_size,
                                 sigma=self.sigma)

    def sampler_params(self) -> SamplerParams:
        return SamplerParams(clip_length=self.clip_length,
                             target_height=self.target_height,
                             target_width=self.target_width,
                             preprocess=self.preprocess)

    def arch_config(self) -> ArchConfig:
        overrides = {}
        for name in ("rnn1_units", "rnn2_units", "dense_units", "dropout1",
                     "dropout2", "l2_lambda", "input_dropout", "recurrent_dropout"):
            value = getattr(self, name)
            if value is not None:
                overrides[name] = value
        return preset(self.arch_preset, input_dim=self.feature_dim,
                      num_classes=len(self.class_names), **overrides)

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, val_fraction=self.val_fraction,
            cap_normal=self.cap_normal, seed=self.seed,
            callbacks=CallbackConfig(
                early_stop_patience=self.early_stop_patience,
                lr_reduce_patience=self.lr_reduce_patience,
                lr_reduce_factor=self.lr_reduce_factor,
            ))

    def split_spec(self) -> SplitSpec:
        return SplitSpec(test_fraction=self.test_fraction, seed=self.seed)

    def separator(self) -> str:
        return "," if self.log_separator == "comma" else " "

    def resolved_cache_root(self) -> Path:
        return Path(self.cache_root) if self.cache_root else Path(self.out_root) / "features"

    def validate(self) -> None:
        """Construct every derived bundle so range errors surface early."""
        try:
            self.association_params()
            self.suppression_params()
            self.sampler_params()
            self.arch_config()
            self.trainer_config()
            self.split_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.log_separator not in ("space", "comma"):
            raise ConfigError(f"log_separator must be 'space' or 'comma', "
                              f"got '{self.log_separator}'")
        if self.adapter not in ("mock", "onnx"):
            raise ConfigError(f"unknown adapter '{self.adapter}'")
        if self.num_trials < 1:
            raise ConfigError(f"num_trials must be >= 1, got {self.num_trials}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


_PARSERS = {
    "manifest": _parse_str, "detections_root": _parse_str,
    "out_root": _parse_str, "cache_root": _parse_str,
    "high_conf_threshold": _parse_float, "low_conf_threshold": _parse_float,
    "iou_gate_stage1": _parse_float, "iou_gate_stage2": _parse_float,
    "max_coast_frames": _parse_int, "min_hits_to_confirm": _parse_int,
    "margin": _parse_int, "kernel_size": _parse_int, "sigma": _parse_float,
    "clip_length": _parse_int, "target_height": _parse_int,
    "target_width": _parse_int, "preprocess": _parse_str,
    "adapter": _parse_str, "feature_dim": _parse_int,
    "adapter_seed": _parse_int, "onnx_model": _parse_str,
    "test_fraction": _parse_float, "val_fraction": _parse_float,
    "arch_preset": _parse_str,
    "rnn1_units": _parse_opt_int, "rnn2_units": _parse_opt_int,
    "dense_units": _parse_opt_int,
    "dropout1": _parse_opt_float, "dropout2": _parse_opt_float,
    "l2_lambda": _parse_opt_float, "input_dropout": _parse_opt_float,
    "recurrent_dropout": _parse_opt_float,
    "epochs": _parse_int, "batch_size": _parse_int,
    "learning_rate": _parse_float, "cap_normal": _parse_opt_int,
    "early_stop_patience": _parse_int, "lr_reduce_patience": _parse_int,
    "lr_reduce_factor": _parse_float,
    "num_trials": _parse_int, "trial_seeds": _parse_seeds,
    "eval_checkpoint": _parse_str, "eval_manifest": _parse_str,
    "seed": _parse_int, "jobs": _parse_int,
    "class_names": _parse_names, "log_separator": _parse_str,
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat key = value lines; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def render_config(values: Mapping[str, object]) -> str:
    lines = []
    for key, value in values.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _coerce(key: str, raw: str, source: str) -> object:
    if key not in _PARSERS:
        raise ConfigError(f"{source}: unknown config key '{key}'")
    try:
        return _PARSERS[key](raw)
    except ValueError as exc:
        raise ConfigError(f"{source}: bad value for '{key}': {exc}") from exc


def load_config(path: str | Path | None = None,
                env: Mapping[str, str] | None = None,
                overrides: Mapping[str, object] | None = None) -> PipelineConfig:
    """Merge defaults, file, environment, and overrides into a validated
    PipelineConfig."""
    merged: dict[str, object] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in parse_config_text(path.read_text(), str(path)).items():
            merged[key] = _coerce(key, raw, str(path))
    env = os.environ if env is None else env
    for key in _PARSERS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            merged[key] = _coerce(key, env[env_key], f"${env_key}")
    if overrides:
        for key, value in overrides.items():
            if key not in _PARSERS:
                raise ConfigError(f"unknown config key '{key}'")
            if value is None:
                continue
            if isinstance(value, str):
                value = _coerce(key, value, "<override>")
            merged[key] = value
    try:
        config = PipelineConfig(**merged)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config
