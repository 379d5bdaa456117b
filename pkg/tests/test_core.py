import numpy as np
import pytest

from fewshot_icnn.core import (DataError, EmbeddingStore, EpisodeSpec, knn_split,
                               make_embedding_set, pairwise_distances,
                               sample_episode)

from conftest import gaussian_labeled

RECT_POINTS = [(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]
RECT_LABELS = ["A", "A", "B", "B"]


class TestMakeEmbeddingSet:
    def test_interning_counts(self):
        es = make_embedding_set([[0, 0], [1, 1], [2, 2]], ["a", "a", "b"])
        assert es.n == 3 and es.dim == 2 and es.n_classes == 2
        assert es.classes == ("a", "b")
        assert es.class_ids.tolist() == [0, 0, 1]

    def test_ragged_rows_rejected(self):
        with pytest.raises(DataError, match="differing lengths"):
            make_embedding_set([[0, 0], [1]], ["a", "b"])

    def test_nan_names_row(self):
        with pytest.raises(DataError, match="row 1"):
            make_embedding_set([[0.0, 0.0], [np.nan, 1.0]], ["a", "b"])

    def test_label_count_mismatch(self):
        with pytest.raises(DataError, match="labels"):
            make_embedding_set([[0.0], [1.0]], ["a"])

    def test_vectors_frozen(self):
        es = make_embedding_set([[0.0, 1.0]], ["a"])
        with pytest.raises(ValueError):
            es.vectors[0, 0] = 5.0


class TestStore:
    def test_requires_class(self):
        with pytest.raises(DataError):
            EmbeddingStore({})

    def test_dimension_checked(self):
        with pytest.raises(DataError, match="dimension"):
            EmbeddingStore({"a": [[0.0, 1.0]], "b": [[0.0]]})

    def test_flatten_round_trip(self):
        store = EmbeddingStore({"a": [[0.0, 1.0]], "b": [[2.0, 3.0], [4.0, 5.0]]})
        flat = store.to_embedding_set()
        assert flat.labels == ("a", "b", "b")
        assert store.counts() == {"a": 1, "b": 2}


def big_store(classes=20, per_class=100, dim=5, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingStore({f"c{i:02d}": rng.normal(size=(per_class, dim))
                           for i in range(classes)})


class TestSampleEpisode:
    def test_counts(self):
        ep = sample_episode(big_store(), EpisodeSpec(5, 5, 15), seed=3)
        assert ep.support.n == 25 and ep.query.n == 75
        assert np.bincount(ep.support.class_ids).tolist() == [5] * 5
        assert np.bincount(ep.query.class_ids).tolist() == [15] * 5

    def test_insufficient_classes(self):
        store = EmbeddingStore({"only": [[0.0], [1.0], [2.0]]})
        with pytest.raises(DataError, match="classes"):
            sample_episode(store, EpisodeSpec(2, 1, 1), seed=0)

    def test_insufficient_vectors_names_class(self):
        store = EmbeddingStore({"a": [[0.0], [1.0]], "b": [[2.0], [3.0]]})
        with pytest.raises(DataError, match="'(a|b)'"):
            sample_episode(store, EpisodeSpec(2, 2, 1), seed=0)

    def test_deterministic(self):
        store = big_store()
        spec = EpisodeSpec(4, 3, 2)
        a = sample_episode(store, spec, seed=77)
        b = sample_episode(store, spec, seed=77)
        assert np.array_equal(a.support.vectors, b.support.vectors)
        assert np.array_equal(a.query.vectors, b.query.vectors)
        assert a.support.labels == b.support.labels

    def test_support_query_disjoint(self):
        store = big_store(classes=3, per_class=10)
        ep = sample_episode(store, EpisodeSpec(3, 4, 6), seed=9)
        sup = {tuple(row) for row in ep.support.vectors}
        qry = {tuple(row) for row in ep.query.vectors}
        assert not sup & qry

    def test_class_coverage_over_many_draws(self):
        store = big_store()
        seen = set()
        for seed in range(1000):
            ep = sample_episode(store, EpisodeSpec(5, 1, 1), seed=seed)
            seen.update(ep.support.classes)
        assert seen == set(store.labels)


class TestPairwiseDistances:
    def test_three_four_five(self):
        es = make_embedding_set([[0.0, 0.0], [3.0, 4.0]], ["a", "b"])
        d = pairwise_distances(es).values
        assert d[0, 1] == pytest.approx(5.0, abs=1e-12)
        assert d[0, 0] == 0.0 and d[1, 1] == 0.0

    def test_matches_double_loop(self):
        es = gaussian_labeled(4, classes=2, per_class=5, dim=3)
        d = pairwise_distances(es).values
        n = es.n
        for i in range(n):
            for j in range(n):
                ref = float(np.sqrt(((es.vectors[i] - es.vectors[j]) ** 2).sum()))
                assert abs(d[i, j] - ref) <= 1e-12

    def test_rigid_motion_invariance(self):
        es = gaussian_labeled(5, classes=2, per_class=6, dim=3)
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0],
                        [0, 0, 1.0]])
        moved = make_embedding_set(es.vectors @ rot.T + 3.5, es.labels)
        d0 = pairwise_distances(es).values
        d1 = pairwise_distances(moved).values
        assert np.abs(d0 - d1).max() <= 1e-9


class TestKnnSplit:
    def test_rectangle_example(self):
        d = pairwise_distances(make_embedding_set(RECT_POINTS, RECT_LABELS))
        split = knn_split(d, RECT_LABELS, 0, 2)
        assert split.same == ((1, 1.0),)
        assert split.diff == ((2, 10.0),)
        assert split.theta == 1.0 and split.alpha == 10.0

    def test_partition_full(self):
        es = gaussian_labeled(6, classes=3, per_class=4, dim=2)
        d = pairwise_distances(es)
        split = knn_split(d, es.class_ids, 2, es.n - 1)
        assert split.size == es.n - 1

    def test_tie_prefers_smaller_index(self):
        # the two unit-distance neighbors straddle the k=1 boundary
        pts = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0)]
        d = pairwise_distances(make_embedding_set(pts, ["a", "b", "b"]))
        split = knn_split(d, ["a", "b", "b"], 0, 1)
        assert split.diff == ((1, 1.0),)

    def test_k_out_of_range(self):
        d = pairwise_distances(make_embedding_set(RECT_POINTS, RECT_LABELS))
        with pytest.raises(ValueError):
            knn_split(d, RECT_LABELS, 0, 4)

    def test_partition_property_random(self):
        es = gaussian_labeled(7, classes=3, per_class=5, dim=3)
        d = pairwise_distances(es)
        for i in range(es.n):
            for k in (1, 3, es.n - 1):
                assert knn_split(d, es.class_ids, i, k).size == k

    def test_k_equals_shot_leaves_a_different_class_neighbor(self):
        shot = 4
        es = gaussian_labeled(8, classes=3, per_class=shot, dim=3)
        d = pairwise_distances(es)
        for i in range(es.n):
            split = knn_split(d, es.class_ids, i, shot)
            assert len(split.same) <= shot - 1
            assert len(split.diff) >= 1
