import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vfboost as vb
from vfboost.boosting import compute_gradients, predict, train_plaintext_forest
from vfboost.errors import IngestionError, ParameterError, SamplingError


class TestGenerateSynthetic:
    def test_table_shapes_binary(self):
        ds = vb.generate_synthetic(2000, 5, 5, 2, 1.0, seed=7)
        assert ds.features.shape == (2000, 10)
        assert ds.class_count == 2
        assert set(np.unique(ds.labels)) == {0, 1}

    def test_table_shapes_multiclass(self):
        ds = vb.generate_synthetic(10000, 5, 5, 10, 1.0, seed=7)
        assert ds.features.shape == (10000, 10)
        assert ds.class_count == 10

    def test_determinism(self):
        a = vb.generate_synthetic(500, 4, 3, 3, 1.5, seed=42)
        b = vb.generate_synthetic(500, 4, 3, 3, 1.5, seed=42)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_balanced_within_one(self):
        ds = vb.generate_synthetic(1001, 5, 5, 2, 1.0, seed=3)
        counts = np.bincount(ds.labels)
        assert counts.max() - counts.min() <= 1

    def test_no_constant_columns(self):
        ds = vb.generate_synthetic(200, 2, 2, 2, 0.5, seed=1)
        assert np.all(np.ptp(ds.features, axis=0) > 0)

    def test_invalid_counts(self):
        with pytest.raises(ParameterError):
            vb.generate_synthetic(3, 5, 5, 2, 1.0, seed=0)
        with pytest.raises(ParameterError):
            vb.generate_synthetic(100, 0, 5, 2, 1.0, seed=0)
        with pytest.raises(ParameterError):
            vb.generate_synthetic(100, 5, 5, 1, 1.0, seed=0)

    def test_label_noise_fraction(self):
        clean = vb.generate_synthetic(4000, 3, 3, 2, 1.0, seed=9)
        noisy = vb.generate_synthetic(4000, 3, 3, 2, 1.0, seed=9, label_noise=0.1)
        assert np.array_equal(clean.features, noisy.features)
        changed = np.mean(clean.labels != noisy.labels)
        assert 0.02 < changed < 0.12

    def test_separability_knob_monotone(self):
        # attack-free accuracy of a depth-8 tree rises with class_sep
        accs = []
        for sep in (0.5, 1.0, 2.0):
            ds = vb.generate_synthetic(1200, 5, 5, 2, sep, seed=13)
            split = vb.train_test_split(ds, seed=13)
            x_tr = ds.features[split.train_rows]
            y_tr = ds.labels[split.train_rows]
            forest = train_plaintext_forest(x_tr, y_tr, 2, rounds=1, max_depth=8)
            scores = predict(forest, ds.features[split.test_rows])
            acc = np.mean((scores > 0) == ds.labels[split.test_rows])
            accs.append(acc)
        assert accs[0] < accs[1] < accs[2]


class TestVerticalPartition:
    def test_synthetic1_columns(self, synthetic1):
        part = vb.vertical_partition(synthetic1, 5)
        assert list(part.active_columns) == [0, 1, 2, 3, 4]
        assert list(part.passive_columns) == [5, 6, 7, 8, 9]

    def test_credit_shapes(self):
        ds = vb.generate_synthetic(100, 12, 13, 2, 1.0, seed=0)
        part = vb.vertical_partition(ds, 12)
        assert len(part.active_columns) == 12
        assert len(part.passive_columns) == 13

    def test_full_active_rejected(self, synthetic1):
        with pytest.raises(ParameterError):
            vb.vertical_partition(synthetic1, synthetic1.n_columns)

    @given(active=st.integers(min_value=1, max_value=9), shuffle=st.booleans())
    @settings(max_examples=30, deadline=None)
    def test_partition_completeness(self, active, shuffle):
        ds = vb.generate_synthetic(50, 5, 5, 2, 1.0, seed=2)
        part = vb.vertical_partition(ds, active, seed=11, shuffle=shuffle)
        merged = np.sort(np.concatenate([part.active_columns, part.passive_columns]))
        assert np.array_equal(merged, np.arange(10))


class TestTrainTestSplit:
    @pytest.mark.parametrize("n,train,test", [(2000, 1333, 667), (3, 2, 1)])
    def test_sizes(self, n, train, test):
        ds = vb.generate_synthetic(max(n, 4), 2, 2, 2, 1.0, seed=1)
        if n == 3:
            ds = vb.Dataset(ds.features[:3], np.array([0, 1, 0]), 2)
        split = vb.train_test_split(ds, seed=4)
        assert len(split.train_rows) == train
        assert len(split.test_rows) == test

    def test_disjoint_cover(self, synthetic1):
        split = vb.train_test_split(synthetic1, seed=9)
        merged = np.sort(np.concatenate([split.train_rows, split.test_rows]))
        assert np.array_equal(merged, np.arange(synthetic1.n_rows))

    def test_determinism(self, synthetic1):
        a = vb.train_test_split(synthetic1, seed=21)
        b = vb.train_test_split(synthetic1, seed=21)
        assert np.array_equal(a.train_rows, b.train_rows)
        assert np.array_equal(a.test_rows, b.test_rows)


class TestSampleBalanced:
    def test_binary_counts(self):
        labels = np.array([0] * 200 + [1] * 300)
        picks = vb.sample_balanced(labels, 50, seed=3)
        assert len(picks) == 100
        assert np.bincount(labels[picks]).tolist() == [50, 50]

    def test_ten_classes(self):
        labels = np.repeat(np.arange(10), 40)
        picks = vb.sample_balanced(labels, 20, seed=3)
        assert len(picks) == 200
        assert np.all(np.bincount(labels[picks]) == 20)

    def test_insufficient_class_named(self):
        labels = np.array([0] * 100 + [1] * 5)
        with pytest.raises(SamplingError, match="class 1"):
            vb.sample_balanced(labels, 10, seed=0)

    def test_no_replacement(self):
        labels = np.array([0] * 30 + [1] * 30)
        picks = vb.sample_balanced(labels, 30, seed=5)
        assert len(set(picks.tolist())) == 60


class TestLoadCsv:
    def test_minimal_csv(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("a,b,label\n1.0,2.0,0\n3.5,4.0,1\n0.5,0.25,0\n")
        ds = vb.load_csv(path, "label", 2)
        assert ds.n_rows == 3
        assert ds.n_columns == 2
        assert ds.labels.tolist() == [0, 1, 0]

    def test_label_by_index(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("y,x\n5,1.0\n7,2.0\n")
        ds = vb.load_csv(path, 0, 2)
        # label values 5 and 7 re-encode to 0 and 1
        assert ds.labels.tolist() == [0, 1]

    def test_non_numeric_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,label\n1.0,0\noops,1\n")
        with pytest.raises(IngestionError, match="row 3.*'a'"):
            vb.load_csv(path, "label", 2)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(IngestionError, match="no column named"):
            vb.load_csv(path, "label", 2)

    def test_class_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,label\n1,0\n2,1\n3,2\n")
        with pytest.raises(IngestionError, match="expected 2 classes"):
            vb.load_csv(path, "label", 2)

    def test_missing_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n1,,0\n")
        with pytest.raises(IngestionError, match="missing value"):
            vb.load_csv(path, "label", 2)

    def test_round_trip_with_generator(self, tmp_path):
        ds = vb.generate_synthetic(60, 3, 2, 2, 1.0, seed=8)
        path = tmp_path / "gen.csv"
        header = ",".join([f"f{i}" for i in range(5)] + ["label"])
        rows = [
            ",".join([repr(float(v)) for v in row] + [str(int(y))])
            for row, y in zip(ds.features, ds.labels)
        ]
        path.write_text(header + "\n" + "\n".join(rows) + "\n")
        loaded = vb.load_csv(path, "label", 2)
        assert np.allclose(loaded.features, ds.features)
        assert np.array_equal(loaded.labels, ds.labels)
