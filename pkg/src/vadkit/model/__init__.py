"""Recurrent sequence classifier: configuration, parameters, forward/backward."""

from .adam import AdamState, adam_step
from .config import ArchConfig, PRESETS, preset
from .network import (apply_dropout, cross_entropy_loss, loss_and_grads,
                      model_backward, model_forward)
from .params import (CheckpointFormatError, LstmLayerParams, ModelParams,
                     init_params, load_checkpoint, save_checkpoint)

__all__ = [
    "AdamState", "adam_step", "ArchConfig", "PRESETS", "preset",
    "apply_dropout", "cross_entropy_loss", "loss_and_grads", "model_backward",
    "model_forward",
    "CheckpointFormatError", "LstmLayerParams", "ModelParams",
    "init_params", "load_checkpoint", "save_checkpoint",
]
