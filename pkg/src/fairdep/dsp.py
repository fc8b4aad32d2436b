"""Signal-processing front end: STFT, mel filterbank, z-normalization.

All operations are pure functions computed in double precision; feature
files persist single precision (little-endian float32, row-major) next
to a JSON sidecar describing shape and normalization provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fairdep.errors import ConfigError, DataError

KIND_MEL = "mel"
KIND_RAW = "raw"

SCOPE_PER_SIGNAL = "per_signal"
SCOPE_PER_GENDER = "per_gender"

# Division-by-zero guard for constant feature rows.
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters for the short-time Fourier transform.

    window_len is the analysis window in samples, hop the advance
    between consecutive frames. Only the Hann window is supported.
    """

    window_len: int = 1024
    hop: int = 512

    def __post_init__(self):
        if self.window_len <= 0:
            raise ConfigError("window_len must be positive")
        if not 0 < self.hop <= self.window_len:
            raise ConfigError("hop must satisfy 0 < hop <= window_len")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1


@dataclass(frozen=True)
class MelConfig:
    """Mel filterbank parameters (HTK mel scale, triangles with peak 1)."""

    n_mels: int = 40
    sample_rate: int = 16000
    f_min: float = 0.0
    f_max: float | None = None  # defaults to sample_rate / 2
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        f_max = self.f_max if self.f_max is not None else self.sample_rate / 2
        if not 0 <= self.f_min < f_max <= self.sample_rate / 2:
            raise ConfigError("need 0 <= f_min < f_max <= sample_rate/2")

    @property
    def effective_f_max(self) -> float:
        return self.f_max if self.f_max is not None else self.sample_rate / 2


@dataclass
class NormStats:
    """Per-row mean/std used by z-normalization.

    scope is "per_signal" or "per_gender"; gender is set only for the
    per-gender scope.
    """

    mean: np.ndarray
    std: np.ndarray
    scope: str
    gender: str | None = None


@dataclass
class FeatureTensor:
    """2-D feature matrix: rows = mel bins (or 1 for raw), cols = frames
    (or samples). kind is "mel" or "raw"."""

    data: np.ndarray
    kind: str
    source_id: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ConfigError("FeatureTensor data must be 2-D")

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# Windowing and spectrogram
# ---------------------------------------------------------------------------


def hann_window(window_len: int) -> np.ndarray:
    """Symmetric Hann window v[n] = 0.5 - 0.5*cos(2*pi*n/(w-1)).

    The single-point window is defined as [1.0].
    """
    if window_len < 1:
        raise ConfigError("window length must be >= 1")
    if window_len == 1:
        return np.ones(1)
    n = np.arange(window_len)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / (window_len - 1))


def frame_count(n_samples: int, window_len: int, hop: int) -> int:
    """Number of full analysis frames with no padding: floor((n-w)/h)+1."""
    if n_samples < window_len:
        raise DataError(
            f"signal too short: {n_samples} samples < window {window_len}"
        )
    return (n_samples - window_len) // hop + 1


def stft_magnitude(signal: np.ndarray, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Magnitude spectrogram, shape (window_len//2 + 1, frames).

    Frames are taken left-aligned with no center padding; trailing
    samples that do not fill a full window are dropped.
    """
    signal = np.asarray(signal, dtype=np.float64).ravel()
    n_frames = frame_count(signal.size, cfg.window_len, cfg.hop)
    window = hann_window(cfg.window_len)
    offsets = np.arange(n_frames) * cfg.hop
    idx = offsets[:, None] + np.arange(cfg.window_len)[None, :]
    frames = signal[idx] * window
    return np.abs(np.fft.rfft(frames, axis=1)).T


def hz_to_mel(f):
    """HTK mel scale m(f) = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    """Inverse of hz_to_mel."""
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MelConfig, n_fft_bins: int) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft_bins).

    Filter centers are equally spaced on the mel scale between f_min
    and f_max; triangles are unnormalized (peak height 1). Every row
    must cover at least one FFT bin, otherwise the FFT resolution is
    too coarse for the requested n_mels.
    """
    if n_fft_bins < 2:
        raise ConfigError("need at least 2 FFT bins")
    sr = cfg.sample_rate
    freqs = np.linspace(0.0, sr / 2.0, n_fft_bins)
    mel_pts = np.linspace(
        hz_to_mel(cfg.f_min), hz_to_mel(cfg.effective_f_max), cfg.n_mels + 2
    )
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((cfg.n_mels, n_fft_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (freqs - lo) / max(center - lo, 1e-12)
        down = (hi - freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)

    empty = np.flatnonzero(fb.max(axis=1) <= 0.0)
    if empty.size:
        raise ConfigError(
            f"n_mels={cfg.n_mels} too large for FFT resolution: "
            f"filter rows {empty.tolist()} cover no bin"
        )
    return fb


def mel_spectrogram(
    signal: np.ndarray,
    stft_cfg: StftConfig = StftConfig(),
    mel_cfg: MelConfig = MelConfig(),
    source_id: int = -1,
) -> FeatureTensor:
    """Log mel-spectrogram feature, shape (n_mels, frames).

    Computes log(max(filterbank @ |STFT|, log_floor)).
    """
    mag = stft_magnitude(signal, stft_cfg)
    fb = mel_filterbank(mel_cfg, stft_cfg.n_bins)
    mel = np.log(np.maximum(fb @ mag, mel_cfg.log_floor))
    return FeatureTensor(mel, KIND_MEL, source_id)


# ---------------------------------------------------------------------------
# z-normalization
# ---------------------------------------------------------------------------


def znorm_per_signal(x: FeatureTensor) -> tuple[FeatureTensor, NormStats]:
    """Standardize each row by its own mean and (population) std.

    Constant rows map to zero via the std floor rather than raising.
    """
    if x.n_cols < 2:
        raise DataError("per-signal normalization needs >= 2 columns")
    mu = x.data.mean(axis=1, keepdims=True)
    sd = np.maximum(x.data.std(axis=1, keepdims=True), STD_FLOOR)
    out = (x.data - mu) / sd
    stats = NormStats(mu[:, 0].copy(), sd[:, 0].copy(), SCOPE_PER_SIGNAL)
    return FeatureTensor(out, x.kind, x.source_id), stats


def znorm_per_gender(x: FeatureTensor, gender: str, stats: NormStats) -> FeatureTensor:
    """Standardize rows by pre-computed gender-corpus statistics.

    stats must come from compute_gender_stats for the same gender as
    the participant that produced x.
    """
    if stats.scope != SCOPE_PER_GENDER:
        raise ConfigError("stats scope must be per_gender")
    if stats.gender != gender:
        raise ConfigError(
            f"gender mismatch: feature is {gender!r}, stats are {stats.gender!r}"
        )
    if stats.mean.shape[0] != x.data.shape[0]:
        raise ConfigError("stats row count does not match feature rows")
    out = (x.data - stats.mean[:, None]) / stats.std[:, None]
    return FeatureTensor(out, x.kind, x.source_id)


def compute_gender_stats(
    training_features: list[tuple[FeatureTensor, str]],
) -> dict[str, NormStats]:
    """Pooled per-row mean/std over all columns of each gender's
    training features.

    Returns a map gender -> NormStats. Both genders must be present.
    """
    acc: dict[str, list] = {}
    for feat, gender in training_features:
        n_rows = feat.data.shape[0]
        if gender not in acc:
            acc[gender] = [np.zeros(n_rows), np.zeros(n_rows), 0]
        if acc[gender][0].shape[0] != n_rows:
            raise ConfigError("feature row counts differ within a gender")
        acc[gender][0] += feat.data.sum(axis=1)
        acc[gender][1] += (feat.data**2).sum(axis=1)
        acc[gender][2] += feat.n_cols

    missing = {"F", "M"} - set(acc)
    if missing:
        raise DataError(f"no training features for gender(s): {sorted(missing)}")

    stats = {}
    for gender, (s, s2, n) in acc.items():
        mean = s / n
        var = np.maximum(s2 / n - mean**2, 0.0)
        std = np.maximum(np.sqrt(var), STD_FLOOR)
        stats[gender] = NormStats(mean, std, SCOPE_PER_GENDER, gender)
    return stats


# ---------------------------------------------------------------------------
# Feature persistence
# ---------------------------------------------------------------------------


def save_feature(
    feature: FeatureTensor, path: str | Path, stats: NormStats | None = None
) -> None:
    """Persist a feature as raw little-endian float32 plus JSON sidecar.

    path is the binary file; the sidecar replaces its suffix with
    ".json". The round trip through load_feature is bit-exact on the
    float32 payload.
    """
    path = Path(path)
    rows, cols = feature.data.shape
    meta = {
        "participant_id": feature.source_id,
        "kind": feature.kind,
        "rows": rows,
        "cols": cols,
        "norm_scope": stats.scope if stats is not None else "none",
    }
    if stats is not None and stats.scope == SCOPE_PER_GENDER:
        meta["gender"] = stats.gender
        meta["mu"] = [float(v) for v in stats.mean]
        meta["sigma"] = [float(v) for v in stats.std]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(feature.data, dtype="<f4").tobytes())
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_feature(path: str | Path) -> tuple[FeatureTensor, dict]:
    """Load a persisted feature; returns (FeatureTensor, sidecar dict).

    Data comes back as float64 whose values equal the stored float32
    exactly.
    """
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not path.exists() or not sidecar.exists():
        raise DataError(f"missing feature file or sidecar for {path}")
    meta = json.loads(sidecar.read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    rows, cols = meta["rows"], meta["cols"]
    if raw.size != rows * cols:
        raise DataError(
            f"feature payload {raw.size} values, sidecar says {rows}x{cols}"
        )
    data = raw.reshape(rows, cols).astype(np.float64)
    return FeatureTensor(data, meta["kind"], meta["participant_id"]), meta
