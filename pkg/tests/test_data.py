import numpy as np
import numpy.testing as npt
import pytest

from mcdal.data import (
    DataError,
    Dataset,
    Oracle,
    Pool,
    PoolError,
    initial_split,
    load_csv,
    make_blobs,
    make_moons,
    make_rings,
    save_csv,
    standardize_features,
)
from mcdal.numeric import Rng


class TestBlobs:
    def test_counts(self):
        ds = make_blobs(5, 3, Rng(0))
        assert ds.n == 15
        assert ds.num_classes == 3
        npt.assert_array_equal(np.bincount(ds.labels), [5, 5, 5])

    def test_zero_spread_puts_points_on_centers(self):
        centers = np.array([[0.0, 0.0], [10.0, 10.0]])
        ds = make_blobs(4, 2, Rng(1), centers=centers, spread=0.0)
        npt.assert_array_equal(ds.features[:4], np.tile(centers[0], (4, 1)))
        npt.assert_array_equal(ds.features[4:], np.tile(centers[1], (4, 1)))

    def test_deterministic_per_seed(self):
        a = make_blobs(10, 4, Rng(7))
        b = make_blobs(10, 4, Rng(7))
        npt.assert_array_equal(a.features, b.features)

    def test_degenerate_parameters(self):
        with pytest.raises(DataError):
            make_blobs(0, 2, Rng(0))
        with pytest.raises(DataError):
            make_blobs(5, 1, Rng(0))
        with pytest.raises(DataError):
            make_blobs(5, 2, Rng(0), spread=-1.0)
        with pytest.raises(DataError):
            make_blobs(5, 3, Rng(0), centers=np.zeros((2, 2)))


class TestMoonsAndRings:
    def test_noise_free_moons_lie_on_half_circles(self):
        ds = make_moons(200, 0.0, Rng(0))
        outer = ds.features[ds.labels == 0]
        inner = ds.features[ds.labels == 1]
        npt.assert_allclose(np.hypot(outer[:, 0], outer[:, 1]), 1.0, atol=1e-12)
        npt.assert_allclose(np.hypot(inner[:, 0] - 1.0, inner[:, 1] - 0.5), 1.0, atol=1e-12)

    def test_noise_free_rings_lie_on_circles(self):
        ds = make_rings(100, 0.0, Rng(0))
        r = np.hypot(ds.features[:, 0], ds.features[:, 1])
        npt.assert_allclose(np.sort(np.unique(np.round(r, 10))), [0.5, 1.0])

    @pytest.mark.parametrize("n", [10, 11, 2000])
    def test_label_balance(self, n):
        ds = make_moons(n, 0.25, Rng(3))
        counts = np.bincount(ds.labels)
        assert abs(int(counts[0]) - int(counts[1])) <= 1

    def test_deterministic_per_seed(self):
        npt.assert_array_equal(
            make_moons(50, 0.3, Rng(9)).features, make_moons(50, 0.3, Rng(9)).features
        )
        npt.assert_array_equal(
            make_rings(50, 0.3, Rng(9)).features, make_rings(50, 0.3, Rng(9)).features
        )


class TestCsv:
    def test_label_mapping_first_appearance(self, tmp_path):
        path = tmp_path / "pets.csv"
        path.write_text("x0,x1,species\n1.0,2.0,cat\n3.0,4.0,dog\n5.0,6.0,cat\n")
        ds = load_csv(path, "species")
        assert ds.num_classes == 2
        assert ds.label_names == ("cat", "dog")
        assert ds.labels.tolist() == [0, 1, 0]

    def test_standardize_zeroes_column_means(self, tmp_path):
        path = tmp_path / "data.csv"
        rng = np.random.default_rng(0)
        rows = "\n".join(f"{a},{b},{i % 2}" for i, (a, b) in enumerate(rng.normal(size=(50, 2))))
        path.write_text("x0,x1,label\n" + rows + "\n")
        ds = load_csv(path, "label", standardize=True)
        npt.assert_allclose(ds.features.mean(axis=0), 0.0, atol=1e-9)
        npt.assert_allclose(ds.features.std(axis=0), 1.0, atol=1e-9)
        assert ds.feature_means is not None

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,label\n1.0,2.0,a\n1.0,oops,b\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(path, "label")

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,label\n1.0,2.0,a\n1.0,2.0\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(path, "label")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot open"):
            load_csv(tmp_path / "nope.csv", "label")

    def test_unknown_label_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,x1,label\n1,2,a\n")
        with pytest.raises(DataError, match="no column"):
            load_csv(path, "target")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(path, "label")

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("x0,label\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(path, "label")

    def test_round_trip(self, tmp_path):
        ds = make_blobs(6, 3, Rng(5))
        path = tmp_path / "snap.csv"
        save_csv(ds, path)
        loaded = load_csv(path, "label")
        npt.assert_array_equal(loaded.features, ds.features)
        npt.assert_array_equal(loaded.labels, ds.labels)
        assert loaded.num_classes == 3


class TestDatasetAndPool:
    def test_dataset_validation(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 2)), np.array([0, 5]), 2)
        with pytest.raises(DataError):
            Dataset(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 2)

    def test_label_mapping_round_trips(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("x0,kind\n1,b\n2,a\n3,b\n4,c\n")
        ds = load_csv(path, "kind")
        recovered = [ds.label_names[i] for i in ds.labels]
        assert recovered == ["b", "a", "b", "c"]

    def test_pool_partition_enforced(self):
        ds = make_blobs(5, 2, Rng(0))
        with pytest.raises(PoolError):
            Pool(ds, np.array([0, 1]), np.array([1, 2, 3, 4, 5, 6, 7, 8, 9]))
        with pytest.raises(PoolError):
            Pool(ds, np.array([0]), np.array([1, 2, 3]))

    def test_oracle_is_pure_lookup(self):
        ds = make_blobs(5, 2, Rng(0))
        oracle = Oracle(ds)
        npt.assert_array_equal(oracle.label([3, 1]), ds.labels[[3, 1]])

    def test_standardize_features_records_stats(self):
        ds = make_blobs(20, 2, Rng(4), spread=2.0)
        out = standardize_features(ds)
        npt.assert_allclose(out.features.mean(axis=0), 0.0, atol=1e-9)
        npt.assert_allclose(
            out.features, (ds.features - out.feature_means) / out.feature_stds, atol=1e-12
        )


class TestInitialSplit:
    def test_protocol_sizes(self):
        # 2500 points, 20% test -> 2000 train; 10% initial -> 200 labeled
        ds = make_moons(2500, 0.2, Rng(1))
        pool, test = initial_split(ds, 0.1, 0.2, Rng(2))
        assert test.n == 500
        assert pool.dataset.n == 2000
        assert pool.labeled_count == 200
        assert pool.unlabeled_count == 1800

    def test_zero_test_fraction_rejected(self):
        ds = make_moons(100, 0.2, Rng(1))
        with pytest.raises(DataError, match="test"):
            initial_split(ds, 0.1, 0.0, Rng(0))

    def test_partition_covers_train_indices(self):
        ds = make_moons(200, 0.2, Rng(3))
        pool, _ = initial_split(ds, 0.15, 0.25, Rng(4))
        pool.check_partition()
        union = np.union1d(pool.labeled_indices, pool.unlabeled_indices)
        npt.assert_array_equal(union, np.arange(pool.dataset.n))

    def test_stratification_balances_classes(self):
        ds = make_blobs(100, 4, Rng(5))
        pool, test = initial_split(ds, 0.1, 0.25, Rng(6))
        labeled_counts = np.bincount(pool.labeled_labels(), minlength=4)
        assert labeled_counts.min() >= 6 and labeled_counts.max() <= 9  # ~7.5 each
        test_counts = np.bincount(test.labels, minlength=4)
        assert test_counts.min() >= 24 and test_counts.max() <= 26

    def test_standardization_fit_on_train_only(self):
        ds = make_blobs(50, 2, Rng(7), spread=3.0)
        pool, test = initial_split(ds, 0.2, 0.3, Rng(8))
        npt.assert_allclose(pool.dataset.features.mean(axis=0), 0.0, atol=1e-9)
        npt.assert_allclose(pool.dataset.features.std(axis=0), 1.0, atol=1e-9)
        # test set shares the train stats, so it is NOT exactly standardized
        assert not np.allclose(test.features.mean(axis=0), 0.0, atol=1e-12)
        npt.assert_array_equal(test.feature_means, pool.dataset.feature_means)

    def test_deterministic_per_seed(self):
        ds = make_moons(300, 0.25, Rng(9))
        a, _ = initial_split(ds, 0.1, 0.25, Rng(10))
        b, _ = initial_split(ds, 0.1, 0.25, Rng(10))
        npt.assert_array_equal(a.labeled_indices, b.labeled_indices)

    def test_tiny_fraction_rejected(self):
        ds = make_moons(20, 0.2, Rng(11))
        with pytest.raises(DataError, match="empty labeled pool"):
            initial_split(ds, 0.01, 0.25, Rng(12))

    def test_non_stratified_mode(self):
        ds = make_blobs(50, 2, Rng(13))
        pool, _ = initial_split(ds, 0.1, 0.25, Rng(14), stratified=False)
        pool.check_partition()
