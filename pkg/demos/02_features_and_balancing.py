"""From waveform to normalized mel features, then the two balancing moves.

Run demos/01_make_corpus.py first; this picks up its output.
"""

from pathlib import Path

import numpy as np

from fairdep.dataset import (
    SPLIT_TRAIN,
    load_manifest,
    partition_quadrants,
    subsample_class_balance,
    subsample_gender_balance,
)
from fairdep.dsp import MelConfig, StftConfig, mel_spectrogram, znorm_per_signal
from fairdep.synth import read_wav

corpus = Path("demo-out/corpus")
records = load_manifest(corpus / "manifest.csv")
train = [r for r in records if r.split == SPLIT_TRAIN]

# --- features ---------------------------------------------------------
rec = train[0]
signal, sr = read_wav(corpus / rec.audio_path)
feat = mel_spectrogram(signal, StftConfig(), MelConfig(), source_id=rec.id)
print(f"participant {rec.id}: {len(signal)} samples -> mel {feat.data.shape}")
print(f"  window 1024, hop 512, 40 triangular bands, log floor 1e-10")

normed, _stats = znorm_per_signal(feat)
mu = np.mean(normed.data, axis=1)
sd = np.std(normed.data, axis=1)
print(f"  after per-signal z-norm: max|row mean| = {np.max(np.abs(mu)):.2e}, "
      f"max|row std - 1| = {np.max(np.abs(sd - 1)):.2e}")

# --- balancing --------------------------------------------------------
quads = partition_quadrants(train)
print("\ntrain quadrants:")
for (gender, label), quad in sorted(quads.items()):
    print(f"  {gender}-{label}: {quad.size}")

balanced = subsample_class_balance(train, seed=0)
n_d = sum(r.y for r in balanced)
print(f"\nclass balance: {len(balanced)} files, {n_d} D / {len(balanced) - n_d} ND")

gendered = subsample_gender_balance(train, seed=0)
for gender in ("F", "M"):
    picked = [r for r in gendered if r.gender == gender]
    rate = sum(r.y for r in picked) / len(picked)
    print(f"gender balance: {gender}: {len(picked)} files, p(D|{gender}) = {rate}")
# equal depression rates by construction, so the label can no longer
# be predicted from the gender cue alone
