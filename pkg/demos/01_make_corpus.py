"""Synthesize a small speech-like corpus and look at what came out.

Writes WAVs plus a manifest under ./demo-out/corpus, then sanity-checks
one male and one female file with an autocorrelation pitch estimate.
"""

from pathlib import Path

import numpy as np

from fairdep.dataset import LABEL_D, LABEL_ND, SPLIT_TRAIN, load_manifest
from fairdep.synth import SynthConfig, gen_corpus, read_wav

out = Path("demo-out")

# A reduced corpus: same quadrant structure as the full default
# (more not-depressed females than depressed, the reverse skew for
# males is in the counts), just fewer files so this runs in seconds.
cfg = SynthConfig(
    train_counts={("F", LABEL_ND): 6, ("F", LABEL_D): 4, ("M", LABEL_ND): 10, ("M", LABEL_D): 3},
    validation_counts={("F", LABEL_ND): 2, ("F", LABEL_D): 2, ("M", LABEL_ND): 2, ("M", LABEL_D): 1},
    duration_range=(4.0, 8.0),
    seed=42,
)
records = gen_corpus(cfg, out / "corpus")
print(f"wrote {len(records)} files to {out / 'corpus'}")

train = [r for r in records if r.split == SPLIT_TRAIN]
for gender in ("F", "M"):
    by_g = [r for r in train if r.gender == gender]
    n_d = sum(r.y for r in by_g)
    print(f"  train {gender}: {len(by_g)} files, {n_d} depressed "
          f"(p(D|{gender}) = {n_d / len(by_g):.3f})")

# the manifest round-trips through the loader used everywhere else
loaded = load_manifest(out / "corpus" / "manifest.csv")
assert loaded == records


def estimate_f0(signal, sr):
    # autocorrelation peak between 60 and 320 Hz, median over frames
    frame, hop = 2048, 1024
    lo, hi = sr // 320, sr // 60
    estimates = []
    for start in range(0, len(signal) - frame + 1, hop):
        chunk = signal[start : start + frame]
        chunk = chunk - chunk.mean()
        ac = np.correlate(chunk, chunk, mode="full")[frame - 1 :]
        estimates.append(sr / (lo + np.argmax(ac[lo : hi + 1])))
    return float(np.median(estimates))


print("\npitch check (autocorrelation):")
for gender in ("M", "F"):
    rec = next(r for r in records if r.gender == gender)
    signal, sr = read_wav(out / "corpus" / rec.audio_path)
    lo, hi = cfg.f0_range(gender)
    f0 = estimate_f0(signal, sr)
    print(f"  participant {rec.id} ({gender}): f0 ~ {f0:.1f} Hz, "
          f"configured range {lo:.0f}-{hi:.0f} Hz")
