"""Shared fixtures: record builders and a small on-disk workspace."""

import numpy as np
import pytest

from fairdep.dataset import (
    LABEL_D,
    LABEL_ND,
    SPLIT_TRAIN,
    SPLIT_VALIDATION,
    ParticipantRecord,
)
from fairdep.synth import SynthConfig, gen_corpus

# quadrant sizes of the reference training and validation splits
TRAIN_COUNTS = {("F", LABEL_ND): 27, ("F", LABEL_D): 17, ("M", LABEL_ND): 49, ("M", LABEL_D): 14}
VAL_COUNTS = {("F", LABEL_ND): 12, ("F", LABEL_D): 7, ("M", LABEL_ND): 11, ("M", LABEL_D): 5}

TINY_TRAIN = {("F", LABEL_ND): 4, ("F", LABEL_D): 3, ("M", LABEL_ND): 5, ("M", LABEL_D): 2}
TINY_VAL = {("F", LABEL_ND): 2, ("F", LABEL_D): 2, ("M", LABEL_ND): 2, ("M", LABEL_D): 2}


def make_records(counts, split, start_id=1):
    """Deterministic records for given quadrant counts; ND rates 3, D rates 15."""
    records = []
    pid = start_id
    for (gender, label), n in sorted(counts.items()):
        for _ in range(n):
            records.append(
                ParticipantRecord(
                    id=pid,
                    gender=gender,
                    phq8=15 if label == LABEL_D else 3,
                    split=split,
                    audio_path=f"{pid:03d}.wav",
                )
            )
            pid += 1
    return records


@pytest.fixture(scope="session")
def table_train_records():
    return make_records(TRAIN_COUNTS, SPLIT_TRAIN)


@pytest.fixture(scope="session")
def table_val_records():
    return make_records(VAL_COUNTS, SPLIT_VALIDATION, start_id=200)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A generated 22-file corpus (14 train / 8 validation) on disk."""
    root = tmp_path_factory.mktemp("tiny-corpus")
    cfg = SynthConfig(
        train_counts=dict(TINY_TRAIN),
        validation_counts=dict(TINY_VAL),
        duration_range=(4.0, 8.0),
        seed=11,
    )
    records = gen_corpus(cfg, root)
    return {"dir": root, "manifest": root / "manifest.csv", "records": records, "cfg": cfg}


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
