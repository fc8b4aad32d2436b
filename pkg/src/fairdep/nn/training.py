"""Training loop, validation inference, and checkpoint IO.

One epoch = rebuild the training batch through the dataset pipeline
(sub-sample, crop, segment, shuffle, reseeded per epoch), sweep it in
minibatches with Adam on mean BCE, then score the untouched validation
set per interview. The best validation macro-F1 parameters are kept.
"""

from __future__ import annotations

import copy
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fairdep.dataset import (
    MODE_CLASS_BALANCE,
    ParticipantRecord,
    SegmentSpec,
    epoch_pipeline,
    segment,
)
from fairdep.errors import ContractError, DataError
from fairdep.metrics import InterviewPrediction, f1, macro_f1
from fairdep.nn.model import ModelSpec, Network, spec_hash
from fairdep.nn.optim import AdamState, TrainConfig, adam_step, bce, lr_schedule

CHECKPOINT_MAGIC = b"FDPK"
CHECKPOINT_VERSION = 1
INIT_STREAM = 1_000_000_007  # keeps the init draw off the per-epoch streams
PREDICT_CHUNK = 64


@dataclass
class TrainResult:
    spec: ModelSpec
    config: TrainConfig
    mode: str
    best_epoch: int
    best_val_macro_f1: float
    best_params: dict[str, np.ndarray]
    history: list[dict] = field(default_factory=list)
    selections: list[list[str]] = field(default_factory=list)
    epochs_run: int = 0


def predict_segments(net: Network, data: np.ndarray) -> np.ndarray:
    """Probabilities for a stack of segments (n, channels, length)."""
    if len(data) == 0:
        return np.zeros(0)
    chunks = [
        net.forward(data[i : i + PREDICT_CHUNK])
        for i in range(0, len(data), PREDICT_CHUNK)
    ]
    return np.concatenate(chunks)


def evaluate_validation(
    net: Network,
    records: list[ParticipantRecord],
    feature_loader,
    spec: SegmentSpec,
    warn=None,
) -> list[InterviewPrediction]:
    """Per-interview predictions over every segment of every validation
    file; no cropping, no sub-sampling."""
    preds = []
    for rec in records:
        feat = feature_loader(rec.id)
        batch = segment([feat], [rec], spec)
        if len(batch) == 0:
            if warn is not None:
                warn(f"validation file {rec.id}: shorter than one segment, skipped")
            continue
        probs = predict_segments(net, batch.data)
        score = float(np.mean(probs))
        preds.append(
            InterviewPrediction(
                participant_id=rec.id,
                gender=rec.gender,
                y_true=rec.y,
                score=score,
                y_pred=int(score >= 0.5),
            )
        )
    if not preds:
        raise DataError("validation produced no interview predictions")
    return preds


def train(
    train_records: list[ParticipantRecord],
    val_records: list[ParticipantRecord],
    feature_loader,
    model_spec: ModelSpec,
    config: TrainConfig,
    mode: str = MODE_CLASS_BALANCE,
    segment_spec: SegmentSpec | None = None,
    out_dir: str | Path | None = None,
    log=None,
) -> TrainResult:
    """Run the full training procedure and return the best checkpoint.

    feature_loader maps a participant id to its FeatureTensor. When
    out_dir is given, per-epoch metrics land in metrics.jsonl, the
    per-epoch selected-file lists in selections.jsonl, and the best
    parameters in checkpoint.fdpk.
    """
    seg_spec = segment_spec if segment_spec is not None else SegmentSpec()
    net = Network(model_spec)
    net.init_params(np.random.default_rng(np.random.SeedSequence([config.seed, INIT_STREAM])))
    params = net.params
    state = AdamState.for_params(params)

    out_path = Path(out_dir) if out_dir is not None else None
    metrics_lines: list[str] = []
    selections_lines: list[str] = []

    result = TrainResult(
        spec=model_spec,
        config=config,
        mode=mode,
        best_epoch=-1,
        best_val_macro_f1=-1.0,
        best_params={},
    )

    for epoch in range(config.epochs):
        batch = epoch_pipeline(
            train_records, feature_loader, mode, seg_spec, config.seed, epoch
        )
        lr = lr_schedule(config, epoch)
        loss_sum = 0.0
        n = len(batch)
        for start in range(0, n, config.batch_size):
            xb = batch.data[start : start + config.batch_size]
            yb = batch.labels[start : start + config.batch_size]
            probs = net.forward(xb)
            loss_sum += float(np.sum(bce(probs, yb)))
            net.backward(yb)
            adam_step(params, net.grads, state, lr, config)

        val_preds = evaluate_validation(net, val_records, feature_loader, seg_spec, warn=log)
        val_f1_nd = f1(val_preds, 0)
        val_f1_d = f1(val_preds, 1)
        val_macro = macro_f1(val_preds)

        improved = val_macro > result.best_val_macro_f1
        if improved:
            result.best_val_macro_f1 = val_macro
            result.best_epoch = epoch
            result.best_params = copy.deepcopy(params)

        row = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": loss_sum / n,
            "train_segments": n,
            "selected_files": len(batch.selected_ids),
            "skipped_files": batch.skipped,
            "val_f1_nd": val_f1_nd,
            "val_f1_d": val_f1_d,
            "val_macro_f1": val_macro,
            "best": improved,
        }
        result.history.append(row)
        result.selections.append(list(batch.selected_ids))
        metrics_lines.append(json.dumps(row, sort_keys=True))
        selections_lines.append(
            json.dumps({"epoch": epoch, "selected_ids": list(batch.selected_ids)}, sort_keys=True)
        )
        if log is not None:
            log(
                f"epoch {epoch:3d}  lr {lr:.6f}  loss {row['train_loss']:.4f}  "
                f"val macro F1 {val_macro:.4f}" + ("  *" if improved else "")
            )
        result.epochs_run = epoch + 1
        if epoch - result.best_epoch >= config.patience:
            if log is not None:
                log(f"early stop at epoch {epoch}: no improvement for {config.patience} epochs")
            break

    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "metrics.jsonl").write_text("\n".join(metrics_lines) + "\n")
        (out_path / "selections.jsonl").write_text("\n".join(selections_lines) + "\n")
        save_checkpoint(out_path / "checkpoint.fdpk", model_spec, result.best_params)
    return result


# --- checkpoint binary format ------------------------------------------------
#
# magic "FDPK" | u32 version | 32-byte sha256 of the model spec |
# u32 tensor count | per tensor: u16 name length, utf-8 name, u8 ndim,
# ndim x u64 dims, float64 data. All integers little-endian.


def save_checkpoint(path: str | Path, spec: ModelSpec, params: dict[str, np.ndarray]) -> None:
    digest = bytes.fromhex(spec_hash(spec))
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), digest]
    parts.append(struct.pack("<I", len(params)))
    for name in sorted(params):
        tensor = np.ascontiguousarray(params[name], dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
        parts.append(tensor.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(
    path: str | Path, spec: ModelSpec | None = None
) -> dict[str, np.ndarray]:
    """Read a checkpoint; when spec is given, reject a hash mismatch."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    if bytes(view[:4]) != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    if len(blob) < 44:
        raise DataError(f"{path}: checkpoint header truncated")
    (version,) = struct.unpack_from("<I", view, 4)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    digest = bytes(view[8:40]).hex()
    if spec is not None and digest != spec_hash(spec):
        raise ContractError(
            f"{path}: checkpoint was written for a different model spec"
        )
    (count,) = struct.unpack_from("<I", view, 40)
    offset = 44

    def take(n: int) -> int:
        if offset + n > len(blob):
            raise DataError(f"{path}: checkpoint truncated at byte {offset}")
        return offset + n

    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        offset_end = take(2)
        (name_len,) = struct.unpack_from("<H", view, offset)
        offset = offset_end
        offset_end = take(name_len + 1)
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        (ndim,) = struct.unpack_from("<B", view, offset + name_len)
        offset = offset_end
        offset_end = take(8 * ndim)
        dims = struct.unpack_from(f"<{ndim}Q", view, offset)
        offset = offset_end
        size = int(np.prod(dims)) if ndim else 1
        offset_end = take(8 * size)
        data = np.frombuffer(view, dtype="<f8", count=size, offset=offset)
        offset = offset_end
        params[name] = data.reshape(dims).astype(np.float64)
    if offset != len(blob):
        raise DataError(f"{path}: trailing bytes after tensor table")
    return params
