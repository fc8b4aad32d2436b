"""Command-line front end.

Subcommands cover the full experiment: ``synth`` writes a corpus,
``features`` extracts and normalizes features, ``train`` fits a model,
``eval`` scores a run on the validation split, and ``report`` merges
runs into one table with the balanced/unbalanced difference column.

Configuration precedence: built-in defaults < config file (key=value
lines, ``#`` comments) < FAIRDEP_* environment variables < flags.
Unknown config keys are rejected. Exit codes: 0 success, 2 config
error, 3 data error, 4 runtime error.

Layout under --out: corpus/ (audio + manifest), features/<kind>-<norm>/,
runs/<run_id>/, report.json, report.txt.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from fairdep import __version__
from fairdep.dataset import (
    MODE_CLASS_BALANCE,
    MODE_GENDER_BALANCE,
    SPLIT_TRAIN,
    SPLIT_VALIDATION,
    SegmentSpec,
    load_manifest,
)
from fairdep.dsp import (
    KIND_MEL,
    KIND_RAW,
    FeatureTensor,
    MelConfig,
    StftConfig,
    compute_gender_stats,
    load_feature,
    mel_spectrogram,
    save_feature,
    znorm_per_gender,
    znorm_per_signal,
)
from fairdep.errors import ConfigError, DataError, FairdepError
from fairdep.metrics import breakdown, statistical_parity_difference, sufficiency_gap
from fairdep.nn.model import MODEL_DEPAUDIONET, MODEL_RAWAUDIO, Network, make_model_spec
from fairdep.nn.optim import TrainConfig
from fairdep.nn.training import evaluate_validation, load_checkpoint, train
from fairdep.report import RunResult, make_run_id, render_report, run_result_from_json
from fairdep.synth import (
    SynthConfig,
    gen_corpus,
    read_wav,
)

ENV_PREFIX = "FAIRDEP_"

PRESETS = {
    "daicwoz-shape": {},
    "tiny": {
        "train_counts": {("F", "ND"): 4, ("F", "D"): 3, ("M", "ND"): 5, ("M", "D"): 2},
        "validation_counts": {
            ("F", "ND"): 2,
            ("F", "D"): 2,
            ("M", "ND"): 2,
            ("M", "D"): 2,
        },
        "duration_range": (4.0, 8.0),
    },
}


def _coerce_int(key):
    def conv(text):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}") from None

    return conv


def _coerce_choice(key, choices):
    def conv(text):
        if text not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, got {text!r}")
        return text

    return conv


# key -> (coercer, default); None default means command-specific fallback
CONFIG_SPEC = {
    "manifest": (str, None),
    "kind": (_coerce_choice("kind", {KIND_MEL, KIND_RAW}), None),
    "norm": (_coerce_choice("norm", {"per-signal", "per-gender"}), "per-signal"),
    "model": (
        _coerce_choice("model", {MODEL_DEPAUDIONET, MODEL_RAWAUDIO}),
        MODEL_DEPAUDIONET,
    ),
    "lambda": (_coerce_int("lambda"), 2),
    "conv_filters": (_coerce_int("conv_filters"), 1),
    "gender_balance": (_coerce_choice("gender_balance", {"on", "off"}), "off"),
    "seed": (_coerce_int("seed"), 0),
    "out": (str, "fairdep-out"),
    "jobs": (_coerce_int("jobs"), 1),
    "epochs": (_coerce_int("epochs"), 100),
    "batch_size": (_coerce_int("batch_size"), 20),
    "patience": (_coerce_int("patience"), 20),
    "preset": (_coerce_choice("preset", set(PRESETS)), "daicwoz-shape"),
}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat key=value config file; unknown keys are rejected."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in CONFIG_SPEC:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment, and flags."""
    merged: dict = {key: default for key, (_, default) in CONFIG_SPEC.items()}

    file_values = {}
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
    for key, text in file_values.items():
        merged[key] = CONFIG_SPEC[key][0](text)

    for key, (conv, _) in CONFIG_SPEC.items():
        env_name = ENV_PREFIX + key.upper()
        if env_name in os.environ:
            merged[key] = conv(os.environ[env_name])

    for key, (conv, _) in CONFIG_SPEC.items():
        attr = "lam" if key == "lambda" else key
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = conv(str(value)) if isinstance(value, str) else value
    return merged


def _out_dir(cfg: dict) -> Path:
    return Path(cfg["out"])


def _manifest_path(cfg: dict) -> Path:
    if cfg["manifest"]:
        return Path(cfg["manifest"])
    return _out_dir(cfg) / "corpus" / "manifest.csv"


def _feature_dir(cfg: dict, kind: str) -> Path:
    return _out_dir(cfg) / "features" / f"{kind}-{cfg['norm']}"


def _kind_for(cfg: dict) -> str:
    """Feature kind, inferred from the model when not set explicitly."""
    if cfg["kind"]:
        return cfg["kind"]
    return KIND_MEL if cfg["model"] == MODEL_DEPAUDIONET else KIND_RAW


def make_feature_loader(feat_dir: Path):
    cache: dict[int, FeatureTensor] = {}

    def load(pid: int) -> FeatureTensor:
        if pid not in cache:
            cache[pid] = load_feature(feat_dir / f"{pid}.f32")[0]
        return cache[pid]

    return load


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(cfg: dict) -> int:
    preset = PRESETS[cfg["preset"]]
    synth_cfg = SynthConfig(seed=cfg["seed"], **preset)
    corpus_dir = _out_dir(cfg) / "corpus"
    records = gen_corpus(synth_cfg, corpus_dir)
    n_train = sum(1 for r in records if r.split == SPLIT_TRAIN)
    n_val = len(records) - n_train
    print(f"wrote {len(records)} files ({n_train} train, {n_val} validation) to {corpus_dir}")
    return 0


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------


def _extract_one(task: tuple[int, str, str]) -> FeatureTensor:
    """Worker: raw feature (no normalization) for one participant."""
    pid, wav_path, kind = task
    signal, sr = read_wav(wav_path)
    if kind == KIND_RAW:
        return FeatureTensor(signal[None, :], KIND_RAW, pid)
    mel = mel_spectrogram(
        signal, StftConfig(), MelConfig(sample_rate=sr), source_id=pid
    )
    return mel


def cmd_features(cfg: dict) -> int:
    manifest = _manifest_path(cfg)
    records = load_manifest(manifest)
    kind = _kind_for(cfg)
    feat_dir = _feature_dir(cfg, kind)
    audio_root = manifest.parent

    missing = [r for r in records if not (audio_root / r.audio_path).exists()]
    for rec in missing:
        print(
            f"error: participant {rec.id}: missing {audio_root / rec.audio_path}",
            file=sys.stderr,
        )
    if missing:
        raise DataError(f"{len(missing)} audio files missing under {audio_root}")

    def stale(rec) -> bool:
        target = feat_dir / f"{rec.id}.f32"
        sidecar = target.with_suffix(".json")
        if not target.exists() or not sidecar.exists():
            return True
        wav_mtime = (audio_root / rec.audio_path).stat().st_mtime
        return target.stat().st_mtime < wav_mtime

    per_gender = cfg["norm"] == "per-gender"
    if per_gender:
        # pooled train stats tie every output to every input, so any
        # stale file reruns the whole set
        stats_file = feat_dir / "stats.json"
        todo = records if (any(map(stale, records)) or not stats_file.exists()) else []
    else:
        todo = [r for r in records if stale(r)]

    if not todo:
        print(f"features up to date in {feat_dir}")
        return 0

    tasks = [(r.id, str(audio_root / r.audio_path), kind) for r in todo]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            features = list(pool.map(_extract_one, tasks))
    else:
        features = [_extract_one(t) for t in tasks]
    by_id = {f.source_id: f for f in features}

    if per_gender:
        train_pairs = [
            (by_id[r.id], r.gender) for r in todo if r.split == SPLIT_TRAIN
        ]
        if not train_pairs:
            raise DataError("per-gender normalization needs training-split files")
        stats_map = compute_gender_stats(train_pairs)
        for rec in todo:
            stats = stats_map[rec.gender]
            normed = znorm_per_gender(by_id[rec.id], rec.gender, stats)
            save_feature(normed, feat_dir / f"{rec.id}.f32", stats)
        stats_doc = {
            gender: {
                "mu": [float(v) for v in stats.mean],
                "sigma": [float(v) for v in stats.std],
            }
            for gender, stats in sorted(stats_map.items())
        }
        (feat_dir / "stats.json").write_text(
            json.dumps(stats_doc, sort_keys=True) + "\n"
        )
    else:
        for rec in todo:
            normed, stats = znorm_per_signal(by_id[rec.id])
            save_feature(normed, feat_dir / f"{rec.id}.f32", stats)

    print(f"extracted {len(todo)} {kind} features ({cfg['norm']}) to {feat_dir}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _validate_model_kind(model: str, kind: str) -> None:
    wanted = KIND_MEL if model == MODEL_DEPAUDIONET else KIND_RAW
    if kind != wanted:
        raise ConfigError(f"model {model} expects kind={wanted}, got kind={kind}")


def cmd_train(cfg: dict) -> int:
    kind = _kind_for(cfg)
    _validate_model_kind(cfg["model"], kind)
    manifest = _manifest_path(cfg)
    records = load_manifest(manifest)
    train_records = [r for r in records if r.split == SPLIT_TRAIN]
    val_records = [r for r in records if r.split == SPLIT_VALIDATION]
    if not train_records or not val_records:
        raise DataError("manifest must contain both train and validation records")

    feat_dir = _feature_dir(cfg, kind)
    loader = make_feature_loader(feat_dir)
    model_spec = make_model_spec(cfg["model"], cfg["conv_filters"])
    train_cfg = TrainConfig(
        lam=cfg["lambda"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        patience=cfg["patience"],
        seed=cfg["seed"],
    )
    gender_balance = cfg["gender_balance"] == "on"
    mode = MODE_GENDER_BALANCE if gender_balance else MODE_CLASS_BALANCE
    run_id = make_run_id(
        cfg["model"], cfg["lambda"], cfg["conv_filters"], gender_balance, cfg["seed"]
    )
    run_dir = _out_dir(cfg) / "runs" / run_id

    result = train(
        train_records,
        val_records,
        loader,
        model_spec,
        train_cfg,
        mode=mode,
        out_dir=run_dir,
        log=lambda msg: print(msg, file=sys.stderr),
    )

    run_doc = {
        "run_id": run_id,
        "model": cfg["model"],
        "lambda": cfg["lambda"],
        "conv_filters": cfg["conv_filters"],
        "gender_balance": gender_balance,
        "seed": cfg["seed"],
        "kind": kind,
        "norm": cfg["norm"],
        "epochs": cfg["epochs"],
        "batch_size": cfg["batch_size"],
        "patience": cfg["patience"],
        "manifest": str(manifest),
        "features": str(feat_dir),
        "best_epoch": result.best_epoch,
        "best_val_macro_f1": round(result.best_val_macro_f1, 6),
        "epochs_run": result.epochs_run,
    }
    (run_dir / "run.json").write_text(json.dumps(run_doc, sort_keys=True, indent=2) + "\n")
    print(
        f"run {run_id}: best val macro F1 {result.best_val_macro_f1:.4f} "
        f"at epoch {result.best_epoch} ({result.epochs_run} epochs run)"
    )
    return 0


# ---------------------------------------------------------------------------
# eval / report
# ---------------------------------------------------------------------------


def _run_dir(cfg: dict, name: str) -> Path:
    direct = Path(name)
    if direct.is_dir():
        return direct
    return _out_dir(cfg) / "runs" / name


def cmd_eval(cfg: dict, run_name: str) -> int:
    run_dir = _run_dir(cfg, run_name)
    run_file = run_dir / "run.json"
    checkpoint = run_dir / "checkpoint.fdpk"
    if not run_file.exists() or not checkpoint.exists():
        raise DataError(f"run directory {run_dir} lacks run.json or checkpoint.fdpk")
    run_doc = json.loads(run_file.read_text())

    model_spec = make_model_spec(run_doc["model"], run_doc["conv_filters"])
    params = load_checkpoint(checkpoint, model_spec)
    net = Network(model_spec)
    net.load_params(params)

    records = load_manifest(Path(run_doc["manifest"]))
    val_records = [r for r in records if r.split == SPLIT_VALIDATION]
    loader = make_feature_loader(Path(run_doc["features"]))
    preds = evaluate_validation(net, val_records, loader, SegmentSpec())

    result = RunResult(
        run_id=run_doc["run_id"],
        model=run_doc["model"],
        lam=run_doc["lambda"],
        conv_filters=run_doc["conv_filters"],
        gender_balance=run_doc["gender_balance"],
        breakdown=breakdown(preds),
        spd=statistical_parity_difference(preds),
        sufficiency_gap=sufficiency_gap(preds),
    )
    json_text, table_text = render_report([result])
    (run_dir / "report.json").write_text(json_text)
    (run_dir / "report.txt").write_text(table_text)
    print(table_text, end="")
    return 0


def cmd_report(cfg: dict, run_names: list[str]) -> int:
    results = []
    for name in run_names:
        report_file = _run_dir(cfg, name) / "report.json"
        if not report_file.exists():
            raise DataError(f"no report.json in {report_file.parent}; run eval first")
        doc = json.loads(report_file.read_text())
        results.extend(run_result_from_json(item) for item in doc["runs"])
    json_text, table_text = render_report(results)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json_text)
    (out / "report.txt").write_text(table_text)
    print(table_text, end="")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdep",
        description="Depression-detection pipeline with gender-bias diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"fairdep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--out", help="workspace directory (default fairdep-out)")
        p.add_argument("--seed", type=int)

    p_synth = sub.add_parser("synth", help="generate the synthetic corpus")
    common(p_synth)
    p_synth.add_argument("--preset", choices=sorted(PRESETS))

    p_feat = sub.add_parser("features", help="extract and normalize features")
    common(p_feat)
    p_feat.add_argument("--manifest")
    p_feat.add_argument("--kind", choices=[KIND_MEL, KIND_RAW])
    p_feat.add_argument("--norm", choices=["per-signal", "per-gender"])
    p_feat.add_argument("--jobs", type=int)

    p_train = sub.add_parser("train", help="train a model")
    common(p_train)
    p_train.add_argument("--manifest")
    p_train.add_argument("--kind", choices=[KIND_MEL, KIND_RAW])
    p_train.add_argument("--norm", choices=["per-signal", "per-gender"])
    p_train.add_argument("--model", choices=[MODEL_DEPAUDIONET, MODEL_RAWAUDIO])
    p_train.add_argument("--lambda", dest="lam", type=int)
    p_train.add_argument("--conv-filters", dest="conv_filters", type=int)
    p_train.add_argument("--gender-balance", dest="gender_balance", choices=["on", "off"])
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--patience", type=int)

    p_eval = sub.add_parser("eval", help="score a trained run on validation")
    common(p_eval)
    p_eval.add_argument("run", help="run id under <out>/runs, or a run directory path")

    p_report = sub.add_parser("report", help="merge run reports into one table")
    common(p_report)
    p_report.add_argument("runs", nargs="*", help="run ids or run directory paths")
    p_report.add_argument(
        "--compare",
        nargs=2,
        metavar=("RUN_A", "RUN_B"),
        help="shorthand for listing exactly two runs",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.run)
        if args.command == "report":
            names = list(args.runs or [])
            if args.compare:
                names.extend(args.compare)
            if not names:
                raise ConfigError("report needs at least one run (or --compare A B)")
            return cmd_report(cfg, names)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (FairdepError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
