"""Interview manifests, labeling, balancing, and segmentation.

The manifest is a CSV with header ``id,gender,phq8,split,audio_path``.
A participant is labeled depressed (D) when the PHQ-8 rating is >= 10,
not depressed (ND) otherwise. Training epochs re-draw sub-sampling,
cropping and shuffling from a stream derived from (seed, epoch_index),
so runs are reproducible and epochs differ.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fairdep.dsp import KIND_RAW, FeatureTensor
from fairdep.errors import ConfigError, DataError

log = logging.getLogger(__name__)

GENDERS = ("F", "M")
LABEL_ND = "ND"
LABEL_D = "D"
SPLIT_TRAIN = "train"
SPLIT_VALIDATION = "validation"

MODE_CLASS_BALANCE = "class"
MODE_GENDER_BALANCE = "gender"

DEPRESSED_THRESHOLD = 10

MANIFEST_FIELDS = ["id", "gender", "phq8", "split", "audio_path"]


def label_for_rating(phq8: int) -> str:
    """PHQ-8 labeling rule: D for ratings >= 10, else ND."""
    return LABEL_D if phq8 >= DEPRESSED_THRESHOLD else LABEL_ND


@dataclass(frozen=True)
class ParticipantRecord:
    """One interview: identity, gender, PHQ-8 rating, split, audio path."""

    id: int
    gender: str
    phq8: int
    split: str
    audio_path: str

    @property
    def label(self) -> str:
        return label_for_rating(self.phq8)

    @property
    def y(self) -> int:
        """Binary target: 1 for depressed."""
        return 1 if self.label == LABEL_D else 0


@dataclass
class Quadrant:
    """One (gender, label) cell of a split."""

    gender: str
    label: str
    members: list[ParticipantRecord]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SegmentSpec:
    """Model input geometry: n_seg feature frames per segment, and the
    equivalent raw length n_seg * hop samples."""

    n_seg: int = 120
    hop: int = 512

    @property
    def raw_len(self) -> int:
        return self.n_seg * self.hop


@dataclass
class SegmentBatch:
    """Uniform stack of training examples with provenance.

    data has shape (n, channels, length): (n, n_mels, n_seg) for mel
    features, (n, 1, raw_len) for raw audio. skipped counts features
    shorter than one segment.
    """

    data: np.ndarray
    labels: np.ndarray
    genders: np.ndarray
    participant_ids: np.ndarray
    skipped: int = 0
    selected_ids: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return self.data.shape[0]


# ---------------------------------------------------------------------------
# Manifest IO
# ---------------------------------------------------------------------------


def load_manifest(path: str | Path) -> list[ParticipantRecord]:
    """Parse and validate a manifest CSV.

    Raises DataError with the offending line number for malformed rows,
    out-of-range ratings, or duplicate ids.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    records: list[ParticipantRecord] = []
    seen: set[int] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_FIELDS:
            raise DataError(
                f"manifest header must be {','.join(MANIFEST_FIELDS)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"line {lineno}: expected 5 fields, got {len(row)}")
            try:
                pid = int(row[0])
                phq8 = int(row[2])
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            gender, split, audio_path = row[1], row[3], row[4]
            if gender not in GENDERS:
                raise DataError(f"line {lineno}: gender must be F or M, got {gender!r}")
            if not 0 <= phq8 <= 24:
                raise DataError(f"line {lineno}: phq8 rating {phq8} outside 0..24")
            if split not in (SPLIT_TRAIN, SPLIT_VALIDATION):
                raise DataError(f"line {lineno}: unknown split {split!r}")
            if pid in seen:
                raise DataError(f"line {lineno}: duplicate participant id {pid}")
            seen.add(pid)
            records.append(ParticipantRecord(pid, gender, phq8, split, audio_path))
    return records


def save_manifest(records: list[ParticipantRecord], path: str | Path) -> None:
    """Write records back out in manifest CSV form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for r in records:
            writer.writerow([r.id, r.gender, r.phq8, r.split, r.audio_path])


# ---------------------------------------------------------------------------
# Partitioning and sub-sampling
# ---------------------------------------------------------------------------


def partition_quadrants(
    records: list[ParticipantRecord], split: str | None = None
) -> dict[tuple[str, str], Quadrant]:
    """Partition records into the four (gender, label) quadrants.

    Returns a dict keyed by (gender, label) covering all four cells,
    possibly with empty member lists.
    """
    if not records:
        raise DataError("cannot partition an empty record list")
    quads = {
        (g, lab): Quadrant(g, lab, [])
        for g in GENDERS
        for lab in (LABEL_ND, LABEL_D)
    }
    for r in records:
        if split is not None and r.split != split:
            continue
        quads[(r.gender, r.label)].members.append(r)
    return quads


def subsample_class_balance(
    records: list[ParticipantRecord], seed
) -> list[ParticipantRecord]:
    """Keep all D records; uniformly sub-sample ND down to the D count.

    Output preserves input order. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    nd_idx = [i for i, r in enumerate(records) if r.label == LABEL_ND]
    d_idx = [i for i, r in enumerate(records) if r.label == LABEL_D]
    if len(nd_idx) < len(d_idx):
        raise DataError(
            f"class balancing expects |ND| >= |D|, got {len(nd_idx)} < {len(d_idx)}"
        )
    chosen = rng.choice(len(nd_idx), size=len(d_idx), replace=False)
    keep = set(d_idx) | {nd_idx[i] for i in chosen}
    return [r for i, r in enumerate(records) if i in keep]


def subsample_gender_balance(
    records: list[ParticipantRecord], seed
) -> list[ParticipantRecord]:
    """Uniformly sub-sample every (gender, label) quadrant down to the
    smallest quadrant, so p(D|F) == p(D|M) == 1/2 in the result.

    Output preserves input order. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    quads = partition_quadrants(records)
    sizes = {key: q.size for key, q in quads.items()}
    if min(sizes.values()) == 0:
        empty = [key for key, n in sizes.items() if n == 0]
        raise DataError(f"gender balancing needs all quadrants nonempty; empty: {empty}")
    target = min(sizes.values())
    keep_ids: set[int] = set()
    for key in sorted(quads):  # fixed iteration order for determinism
        members = quads[key].members
        chosen = rng.choice(len(members), size=target, replace=False)
        keep_ids.update(members[i].id for i in chosen)
    return [r for r in records if r.id in keep_ids]


# ---------------------------------------------------------------------------
# Cropping and segmentation
# ---------------------------------------------------------------------------


def crop_to_shortest(features: list[FeatureTensor], seed) -> list[FeatureTensor]:
    """Randomly crop every feature to the length of the shortest one.

    The crop offset is uniform in [0, len - min_len] per feature and is
    re-drawn from the seed stream on every call.
    """
    if not features:
        raise DataError("crop_to_shortest needs at least one feature")
    rng = np.random.default_rng(seed)
    min_len = min(f.n_cols for f in features)
    out = []
    for f in features:
        slack = f.n_cols - min_len
        offset = int(rng.integers(0, slack + 1)) if slack > 0 else 0
        out.append(
            FeatureTensor(f.data[:, offset : offset + min_len].copy(), f.kind, f.source_id)
        )
    return out


def _segment_len(feature: FeatureTensor, spec: SegmentSpec) -> int:
    return spec.raw_len if feature.kind == KIND_RAW else spec.n_seg


def segment(
    features: list[FeatureTensor],
    records: list[ParticipantRecord],
    spec: SegmentSpec = SegmentSpec(),
) -> SegmentBatch:
    """Split features into non-overlapping fixed-size segments.

    Trailing remainders are dropped. Features shorter than one segment
    are skipped and counted in SegmentBatch.skipped. Each segment
    inherits (label, gender, participant id) from its record.
    """
    if len(features) != len(records):
        raise DataError("features and records must align one-to-one")
    chunks, labels, genders, pids = [], [], [], []
    skipped = 0
    for feat, rec in zip(features, records):
        seg_len = _segment_len(feat, spec)
        n_segs = feat.n_cols // seg_len
        if n_segs == 0:
            skipped += 1
            log.warning(
                "feature %s has %d columns, shorter than one segment (%d); skipped",
                rec.id,
                feat.n_cols,
                seg_len,
            )
            continue
        for k in range(n_segs):
            chunks.append(feat.data[:, k * seg_len : (k + 1) * seg_len])
            labels.append(rec.y)
            genders.append(rec.gender)
            pids.append(rec.id)
    if chunks:
        data = np.stack(chunks)
    else:
        rows = features[0].data.shape[0] if features else 0
        data = np.empty((0, rows, 0))
    return SegmentBatch(
        data=data,
        labels=np.asarray(labels, dtype=np.int64),
        genders=np.asarray(genders, dtype="<U1"),
        participant_ids=np.asarray(pids, dtype=np.int64),
        skipped=skipped,
    )


def epoch_rng_streams(seed: int, epoch_index: int, n: int) -> list[np.random.Generator]:
    """Deterministic per-(seed, epoch) child streams, one per operation."""
    ss = np.random.SeedSequence([int(seed), int(epoch_index)])
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def epoch_pipeline(
    records: list[ParticipantRecord],
    feature_loader,
    mode: str,
    spec: SegmentSpec,
    seed: int,
    epoch_index: int,
) -> SegmentBatch:
    """One epoch's training examples: sub-sample, crop, segment, shuffle.

    mode is "class" (keep all D, sub-sample ND) or "gender" (equalize
    all four quadrants). feature_loader maps participant id to a
    FeatureTensor. Randomness is re-drawn per epoch from
    (seed, epoch_index); the selected file ids are recorded on the
    returned batch for reproducibility audits.
    """
    if not records:
        raise DataError("epoch pipeline got an empty record list")
    sub_rng, crop_rng, shuffle_rng = epoch_rng_streams(seed, epoch_index, 3)
    if mode == MODE_CLASS_BALANCE:
        selected = subsample_class_balance(records, sub_rng)
    elif mode == MODE_GENDER_BALANCE:
        selected = subsample_gender_balance(records, sub_rng)
    else:
        raise ConfigError(f"unknown balancing mode {mode!r}")

    features = [feature_loader(r.id) for r in selected]
    cropped = crop_to_shortest(features, crop_rng)
    batch = segment(cropped, selected, spec)
    order = shuffle_rng.permutation(len(batch))
    batch.data = batch.data[order]
    batch.labels = batch.labels[order]
    batch.genders = batch.genders[order]
    batch.participant_ids = batch.participant_ids[order]
    batch.selected_ids = [r.id for r in selected]
    return batch
