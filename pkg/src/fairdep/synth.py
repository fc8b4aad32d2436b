"""Synthetic 16 kHz speech-like corpus with controllable bias structure.

Each participant is a harmonic voice: three partials over a slowly
drifting fundamental, a syllabic amplitude envelope, and a little
noise. Gender sets the fundamental range; the depressed condition
shrinks the fundamental drift variance and the envelope depth, so
pitch carries gender and prosody dynamics carry the label. Default
quadrant counts mirror the reference corpus splits.

Waveforms are deterministic in (seed, participant id) alone, so a
corpus can be regenerated file by file.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fairdep.dataset import (
    GENDERS,
    LABEL_D,
    LABEL_ND,
    SPLIT_TRAIN,
    SPLIT_VALIDATION,
    ParticipantRecord,
    save_manifest,
)
from fairdep.errors import ConfigError, DataError

SAMPLE_RATE = 16000
HARMONIC_AMPS = (1.0, 0.5, 0.25)
AM_RATE_RANGE = (2.5, 4.5)  # syllabic envelope rate, Hz
AM_DEPTH = 0.85
NOISE_STD = 0.01
MASTER_GAIN = 0.85
F0_DRIFT_STD = 6.0  # Hz, stationary std of the fundamental drift
F0_DRIFT_RHO = 0.995
CONTROL_RATE = 100  # Hz, drift/envelope control grid

TRAIN_QUADRANT_COUNTS = {
    ("F", LABEL_ND): 27,
    ("F", LABEL_D): 17,
    ("M", LABEL_ND): 49,
    ("M", LABEL_D): 14,
}
VALIDATION_QUADRANT_COUNTS = {
    ("F", LABEL_ND): 12,
    ("F", LABEL_D): 7,
    ("M", LABEL_ND): 11,
    ("M", LABEL_D): 5,
}


@dataclass(frozen=True)
class SynthConfig:
    """Corpus recipe: quadrant counts per split, duration and pitch
    ranges, and the depression effect sizes.

    f0_var_scale multiplies the drift variance for depressed speakers;
    energy_dyn_scale multiplies the envelope depth. Both 1.0 would make
    the label carry no signal (the null-effect control). The defaults
    are deliberately mild: strong prosody cues make the depression
    class trivially separable, and a model that nails the class never
    leans on the gender shortcut the bias experiment measures."""

    train_counts: dict = field(default_factory=lambda: dict(TRAIN_QUADRANT_COUNTS))
    validation_counts: dict = field(
        default_factory=lambda: dict(VALIDATION_QUADRANT_COUNTS)
    )
    duration_range: tuple[float, float] = (10.0, 40.0)
    f0_range_m: tuple[float, float] = (85.0, 155.0)
    f0_range_f: tuple[float, float] = (165.0, 255.0)
    f0_var_scale: float = 0.75
    energy_dyn_scale: float = 0.85
    sample_rate: int = SAMPLE_RATE
    seed: int = 0

    def __post_init__(self):
        for counts in (self.train_counts, self.validation_counts):
            for key, n in counts.items():
                if n < 0:
                    raise ConfigError(f"quadrant count for {key} must be >= 0")
        if not 0.0 < self.f0_var_scale <= 1.0:
            raise ConfigError("f0_var_scale must lie in (0, 1]")
        if not 0.0 < self.energy_dyn_scale <= 1.0:
            raise ConfigError("energy_dyn_scale must lie in (0, 1]")
        lo, hi = self.duration_range
        if not 0.0 < lo <= hi:
            raise ConfigError("duration_range must satisfy 0 < lo <= hi")
        if self.sample_rate < 1:
            raise ConfigError("sample_rate must be positive")

    def f0_range(self, gender: str) -> tuple[float, float]:
        if gender == "M":
            return self.f0_range_m
        if gender == "F":
            return self.f0_range_f
        raise ConfigError(f"gender must be one of {GENDERS}, got {gender!r}")


SYNTH_STREAM = 0x5AD0  # domain separator: corpus draws never share a
# stream with training draws even under equal seeds


def _participant_rng(seed: int, participant_id: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, SYNTH_STREAM, participant_id])
    )


def gen_participant(
    gender: str,
    label: str,
    cfg: SynthConfig,
    participant_id: int,
    split: str = SPLIT_TRAIN,
) -> tuple[ParticipantRecord, np.ndarray]:
    """One synthetic speaker: record plus float waveform in [-1, 1]."""
    if label not in (LABEL_ND, LABEL_D):
        raise ConfigError(f"label must be {LABEL_ND!r} or {LABEL_D!r}")
    rng = _participant_rng(cfg.seed, participant_id)
    sr = cfg.sample_rate
    duration = rng.uniform(*cfg.duration_range)
    n = int(round(duration * sr))
    t = np.arange(n) / sr

    depressed = label == LABEL_D
    drift_scale = np.sqrt(cfg.f0_var_scale) if depressed else 1.0
    am_depth = AM_DEPTH * (cfg.energy_dyn_scale if depressed else 1.0)

    f0_mean = rng.uniform(*cfg.f0_range(gender))
    n_ctrl = int(np.ceil(n * CONTROL_RATE / sr)) + 1
    innov_std = F0_DRIFT_STD * drift_scale * np.sqrt(1.0 - F0_DRIFT_RHO**2)
    innovations = rng.normal(0.0, innov_std, size=n_ctrl)
    drift = np.empty(n_ctrl)
    drift[0] = rng.normal(0.0, F0_DRIFT_STD * drift_scale)
    for k in range(1, n_ctrl):
        drift[k] = F0_DRIFT_RHO * drift[k - 1] + innovations[k]
    ctrl_t = np.arange(n_ctrl) / CONTROL_RATE
    f0 = f0_mean + np.interp(t, ctrl_t, drift)

    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    amps = np.asarray(HARMONIC_AMPS) / np.sum(HARMONIC_AMPS)
    voiced = sum(a * np.sin((k + 1) * phase) for k, a in enumerate(amps))

    am_rate = rng.uniform(*AM_RATE_RANGE)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    envelope = (1.0 - am_depth) + am_depth * (
        0.5 + 0.5 * np.sin(2.0 * np.pi * am_rate * t + am_phase)
    )

    noise = rng.normal(0.0, NOISE_STD, size=n)
    signal = MASTER_GAIN * (voiced * envelope + noise)

    phq8 = int(rng.integers(10, 25)) if depressed else int(rng.integers(0, 10))
    record = ParticipantRecord(
        id=participant_id,
        gender=gender,
        phq8=phq8,
        split=split,
        audio_path=f"{participant_id:03d}.wav",
    )
    return record, signal


def gen_corpus(cfg: SynthConfig, out_dir: str | Path) -> list[ParticipantRecord]:
    """Write WAVs plus manifest.csv under out_dir; returns the records.

    Integer ids count up across train then validation, walking the
    quadrants in sorted order so numbering is stable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records: list[ParticipantRecord] = []
    pid = 0
    for split, counts in (
        (SPLIT_TRAIN, cfg.train_counts),
        (SPLIT_VALIDATION, cfg.validation_counts),
    ):
        for gender, label in sorted(counts):
            for _ in range(counts[(gender, label)]):
                pid += 1
                record, signal = gen_participant(gender, label, cfg, pid, split)
                write_wav(out / record.audio_path, signal, cfg.sample_rate)
                records.append(record)
    save_manifest(records, out / "manifest.csv")
    return records


# --- WAV IO (RIFF PCM16 mono) -------------------------------------------------


def write_wav(path: str | Path, signal: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("waveform must be one-dimensional")
    pcm = np.clip(np.round(x * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono PCM16 WAV to float64 in [-1, 1] plus its sample rate."""
    try:
        handle = wave.open(str(path), "rb")
    except (OSError, wave.Error) as exc:
        raise DataError(f"{path}: cannot read WAV ({exc})") from exc
    with handle as fh:
        if fh.getnchannels() != 1:
            raise DataError(f"{path}: expected mono audio")
        if fh.getsampwidth() != 2:
            raise DataError(f"{path}: expected 16-bit PCM")
        sr = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return pcm.astype(np.float64) / 32767.0, sr
