"""Minimal numpy neural-network engine: forward, analytic backward, Adam."""

from fairdep.nn.layers import LSTM, Conv1d, Dense, MaxPool1d, ReLU
from fairdep.nn.model import (
    ConvSpec,
    ModelSpec,
    Network,
    conv_out_len,
    make_model_spec,
    spec_hash,
)
from fairdep.nn.optim import AdamState, TrainConfig, adam_step, bce, lr_schedule, mean_bce
from fairdep.nn.training import (
    TrainResult,
    evaluate_validation,
    load_checkpoint,
    predict_segments,
    save_checkpoint,
    train,
)

__all__ = [
    "AdamState",
    "Conv1d",
    "ConvSpec",
    "Dense",
    "LSTM",
    "MaxPool1d",
    "ModelSpec",
    "Network",
    "ReLU",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "bce",
    "conv_out_len",
    "evaluate_validation",
    "load_checkpoint",
    "lr_schedule",
    "make_model_spec",
    "mean_bce",
    "predict_segments",
    "save_checkpoint",
    "spec_hash",
    "train",
]
