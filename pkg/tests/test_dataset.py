"""Manifests, labeling, quadrant balancing, cropping, segmentation."""

import numpy as np
import pytest

from fairdep.dataset import (
    GENDERS,
    LABEL_D,
    LABEL_ND,
    MODE_CLASS_BALANCE,
    MODE_GENDER_BALANCE,
    SPLIT_TRAIN,
    ParticipantRecord,
    SegmentSpec,
    crop_to_shortest,
    epoch_pipeline,
    label_for_rating,
    load_manifest,
    partition_quadrants,
    save_manifest,
    segment,
    subsample_class_balance,
    subsample_gender_balance,
)
from fairdep.dsp import KIND_MEL, KIND_RAW, FeatureTensor
from fairdep.errors import ConfigError, DataError

from conftest import make_records


class TestLabeling:
    def test_threshold_rule_over_full_range(self):
        for r in range(25):
            expected = LABEL_D if r >= 10 else LABEL_ND
            assert label_for_rating(r) == expected

    def test_boundary(self):
        assert label_for_rating(9) == LABEL_ND
        assert label_for_rating(10) == LABEL_D

    def test_record_binary_target(self):
        rec = ParticipantRecord(1, "F", 10, SPLIT_TRAIN, "a.wav")
        assert rec.label == LABEL_D
        assert rec.y == 1


class TestManifestIO:
    def test_roundtrip(self, tmp_path, table_train_records):
        path = tmp_path / "manifest.csv"
        save_manifest(table_train_records, path)
        loaded = load_manifest(path)
        assert loaded == table_train_records

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_manifest(tmp_path / "absent.csv")

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,sex,phq8,split,audio_path\n")
        with pytest.raises(DataError, match="header"):
            load_manifest(p)

    @pytest.mark.parametrize(
        "row,fragment",
        [
            ("1,X,5,train,a.wav", "gender"),
            ("1,F,25,train,a.wav", "0..24"),
            ("1,F,5,test,a.wav", "split"),
            ("abc,F,5,train,a.wav", "invalid literal"),
        ],
    )
    def test_bad_rows_name_line(self, tmp_path, row, fragment):
        p = tmp_path / "m.csv"
        p.write_text("id,gender,phq8,split,audio_path\n" + row + "\n")
        with pytest.raises(DataError, match="line 2"):
            load_manifest(p)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "id,gender,phq8,split,audio_path\n"
            "1,F,5,train,a.wav\n"
            "1,M,5,train,b.wav\n"
        )
        with pytest.raises(DataError, match="duplicate"):
            load_manifest(p)


class TestQuadrants:
    def test_reference_training_shape(self, table_train_records):
        quads = partition_quadrants(table_train_records)
        sizes = {k: q.size for k, q in quads.items()}
        assert sizes == {
            ("F", LABEL_ND): 27,
            ("F", LABEL_D): 17,
            ("M", LABEL_ND): 49,
            ("M", LABEL_D): 14,
        }

    def test_partition_covers_input_exactly_once(self, table_train_records):
        quads = partition_quadrants(table_train_records)
        all_ids = [r.id for q in quads.values() for r in q.members]
        assert sorted(all_ids) == sorted(r.id for r in table_train_records)

    def test_split_filter(self, table_train_records, table_val_records):
        quads = partition_quadrants(
            table_train_records + table_val_records, split=SPLIT_TRAIN
        )
        assert sum(q.size for q in quads.values()) == len(table_train_records)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            partition_quadrants([])


class TestClassBalance:
    def test_reference_counts(self, table_train_records):
        out = subsample_class_balance(table_train_records, seed=3)
        labels = [r.label for r in out]
        assert labels.count(LABEL_D) == 31
        assert labels.count(LABEL_ND) == 31

    def test_already_balanced_unchanged(self):
        records = make_records({("F", LABEL_ND): 3, ("F", LABEL_D): 3}, SPLIT_TRAIN)
        assert subsample_class_balance(records, seed=0) == records

    def test_deterministic(self, table_train_records):
        a = subsample_class_balance(table_train_records, seed=42)
        b = subsample_class_balance(table_train_records, seed=42)
        assert a == b

    def test_subset_preserving_order(self, table_train_records):
        out = subsample_class_balance(table_train_records, seed=5)
        positions = [table_train_records.index(r) for r in out]
        assert positions == sorted(positions)

    def test_more_depressed_than_not_rejected(self):
        records = make_records({("F", LABEL_ND): 1, ("F", LABEL_D): 3}, SPLIT_TRAIN)
        with pytest.raises(DataError):
            subsample_class_balance(records, seed=0)


class TestGenderBalance:
    def test_reference_counts(self, table_train_records):
        out = subsample_gender_balance(table_train_records, seed=1)
        assert len(out) == 56
        quads = partition_quadrants(out)
        assert all(q.size == 14 for q in quads.values())

    def test_equal_depression_rates_by_construction(self, table_train_records):
        out = subsample_gender_balance(table_train_records, seed=2)
        by_gender = {g: [r for r in out if r.gender == g] for g in GENDERS}
        rates = {
            g: sum(r.y for r in rs) / len(rs) for g, rs in by_gender.items()
        }
        assert rates["F"] == rates["M"] == 0.5

    def test_already_equal_unchanged(self):
        records = make_records(
            {("F", LABEL_ND): 2, ("F", LABEL_D): 2, ("M", LABEL_ND): 2, ("M", LABEL_D): 2},
            SPLIT_TRAIN,
        )
        assert subsample_gender_balance(records, seed=0) == records

    def test_deterministic_subset(self, table_train_records):
        a = subsample_gender_balance(table_train_records, seed=9)
        b = subsample_gender_balance(table_train_records, seed=9)
        assert a == b
        ids = {r.id for r in table_train_records}
        assert all(r.id in ids for r in a)

    def test_empty_quadrant_rejected(self):
        records = make_records(
            {("F", LABEL_ND): 2, ("F", LABEL_D): 2, ("M", LABEL_ND): 2}, SPLIT_TRAIN
        )
        with pytest.raises(DataError, match="quadrant"):
            subsample_gender_balance(records, seed=0)


class TestCrop:
    def _features(self, lengths):
        rng = np.random.default_rng(0)
        return [
            FeatureTensor(rng.normal(size=(3, n)), KIND_MEL, i)
            for i, n in enumerate(lengths)
        ]

    def test_all_cropped_to_min(self):
        out = crop_to_shortest(self._features([100, 150, 200]), seed=0)
        assert [f.n_cols for f in out] == [100, 100, 100]

    def test_single_feature_unchanged(self):
        feats = self._features([64])
        out = crop_to_shortest(feats, seed=0)
        np.testing.assert_array_equal(out[0].data, feats[0].data)

    def test_crop_is_contiguous_slice(self):
        feats = self._features([50, 90])
        out = crop_to_shortest(feats, seed=7)
        long = feats[1].data
        found = any(
            np.array_equal(long[:, off : off + 50], out[1].data)
            for off in range(90 - 50 + 1)
        )
        assert found

    def test_same_seed_same_offsets(self):
        feats = self._features([80, 120, 77])
        a = crop_to_shortest(feats, seed=123)
        b = crop_to_shortest(feats, seed=123)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.data, fb.data)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            crop_to_shortest([], seed=0)


class TestSegment:
    def test_mel_segment_count(self):
        feat = FeatureTensor(np.arange(40 * 360, dtype=float).reshape(40, 360), KIND_MEL, 1)
        rec = ParticipantRecord(1, "F", 15, SPLIT_TRAIN, "a.wav")
        batch = segment([feat], [rec])
        assert len(batch) == 3
        assert batch.data.shape == (3, 40, 120)

    def test_raw_segment_count(self):
        feat = FeatureTensor(np.zeros((1, 61440)), KIND_RAW, 2)
        rec = ParticipantRecord(2, "M", 3, SPLIT_TRAIN, "a.wav")
        batch = segment([feat], [rec])
        assert len(batch) == 1
        assert batch.data.shape == (1, 1, 61440)

    def test_short_feature_skipped_with_count(self):
        feat = FeatureTensor(np.zeros((40, 119)), KIND_MEL, 3)
        rec = ParticipantRecord(3, "F", 3, SPLIT_TRAIN, "a.wav")
        batch = segment([feat], [rec])
        assert len(batch) == 0
        assert batch.skipped == 1

    def test_concatenation_reproduces_prefix(self):
        data = np.random.default_rng(5).normal(size=(2, 250))
        feat = FeatureTensor(data, KIND_MEL, 4)
        rec = ParticipantRecord(4, "M", 15, SPLIT_TRAIN, "a.wav")
        batch = segment([feat], [rec], SegmentSpec(n_seg=100))
        rebuilt = np.concatenate(list(batch.data), axis=1)
        np.testing.assert_array_equal(rebuilt, data[:, :200])

    def test_provenance(self):
        feats = [
            FeatureTensor(np.zeros((2, 240)), KIND_MEL, 10),
            FeatureTensor(np.zeros((2, 120)), KIND_MEL, 11),
        ]
        recs = [
            ParticipantRecord(10, "F", 15, SPLIT_TRAIN, "a.wav"),
            ParticipantRecord(11, "M", 3, SPLIT_TRAIN, "b.wav"),
        ]
        batch = segment(feats, recs)
        assert batch.labels.tolist() == [1, 1, 0]
        assert batch.genders.tolist() == ["F", "F", "M"]
        assert batch.participant_ids.tolist() == [10, 10, 11]

    def test_misaligned_inputs_rejected(self):
        feat = FeatureTensor(np.zeros((2, 240)), KIND_MEL, 1)
        with pytest.raises(DataError):
            segment([feat], [])


class TestEpochPipeline:
    @staticmethod
    def _loader(pid):
        rng = np.random.default_rng(pid)
        return FeatureTensor(rng.normal(size=(4, 120 + pid % 61)), KIND_MEL, pid)

    def test_gender_mode_selects_56_files(self, table_train_records):
        batch = epoch_pipeline(
            table_train_records, self._loader, MODE_GENDER_BALANCE, SegmentSpec(), 0, 0
        )
        assert len(batch.selected_ids) == 56

    def test_class_mode_selects_62_files(self, table_train_records):
        batch = epoch_pipeline(
            table_train_records, self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 0, 0
        )
        assert len(batch.selected_ids) == 62

    def test_reproducible_per_epoch(self, table_train_records):
        a = epoch_pipeline(table_train_records, self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 7, 3)
        b = epoch_pipeline(table_train_records, self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 7, 3)
        np.testing.assert_array_equal(a.data, b.data)
        assert a.selected_ids == b.selected_ids

    def test_epochs_differ(self, table_train_records):
        a = epoch_pipeline(table_train_records, self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 7, 0)
        b = epoch_pipeline(table_train_records, self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 7, 1)
        assert not (
            a.data.shape == b.data.shape and np.array_equal(a.data, b.data)
        )

    def test_shuffle_keeps_label_multiset(self, table_train_records):
        batch = epoch_pipeline(
            table_train_records, self._loader, MODE_GENDER_BALANCE, SegmentSpec(), 1, 0
        )
        # 56 files cropped to the common shortest length, one segment each
        assert sorted(batch.labels.tolist()).count(1) == len(batch) // 2

    def test_empty_records_rejected(self):
        with pytest.raises(DataError):
            epoch_pipeline([], self._loader, MODE_CLASS_BALANCE, SegmentSpec(), 0, 0)

    def test_unknown_mode_rejected(self, table_train_records):
        with pytest.raises(ConfigError):
            epoch_pipeline(
                table_train_records, self._loader, "bogus", SegmentSpec(), 0, 0
            )
