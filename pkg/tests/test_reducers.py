import sys

import numpy as np
import pytest

from fewshot_icnn.core import euclidean_distances
from fewshot_icnn.reducers import (ReducerFailure, ReducerSpec,
                                   feature_agglomeration, fit_transform,
                                   geodesic_distances, isomap, kernel_pca, pca,
                                   resolve_isomap_neighbors, run_external,
                                   truncated_svd)

from conftest import gaussian_labeled, probe_pca_basis, probe_tsvd_basis
from oracles import (average_linkage_clusters, floyd_warshall, power_eigh,
                     principal_angle)


def random_matrix(seed, n=30, d=8):
    return np.random.default_rng(seed).normal(size=(n, d))


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ReducerSpec(kind="umap")

    def test_bad_target_dim(self):
        with pytest.raises(ValueError):
            ReducerSpec(kind="pca", target_dim=0)

    def test_external_needs_command(self):
        with pytest.raises(ValueError, match="command"):
            ReducerSpec(kind="external")

    def test_name_and_with_dim(self):
        spec = ReducerSpec(kind="pca", target_dim=6)
        assert spec.name == "pca-6"
        assert spec.with_dim(4).name == "pca-4"
        assert ReducerSpec(kind="identity").name == "identity"


class TestDispatch:
    def test_identity_ignores_target_dim(self):
        x = random_matrix(0, n=5, d=3)
        out = fit_transform(ReducerSpec(kind="identity", target_dim=99), x, seed=0)
        assert np.array_equal(out.vectors, x)
        assert out.fit_row_count == 5

    def test_target_dim_above_input_fails(self):
        x = random_matrix(0, n=5, d=3)
        with pytest.raises(ReducerFailure, match="pca-4"):
            fit_transform(ReducerSpec(kind="pca", target_dim=4), x, seed=0)

    def test_single_fit_row_fails(self):
        x = random_matrix(0, n=4, d=3)
        with pytest.raises(ReducerFailure, match="2 fit rows"):
            fit_transform(ReducerSpec(kind="pca", target_dim=2), x, seed=0, n_fit=1)

    def test_isomap_needs_enough_rows(self):
        x = random_matrix(0, n=8, d=5)
        with pytest.raises(ReducerFailure, match="isomap-4"):
            fit_transform(ReducerSpec(kind="isomap", target_dim=4), x, seed=0,
                          n_fit=3)

    def test_full_dim_pca_preserves_distances(self):
        x = random_matrix(1, n=20, d=6)
        out = fit_transform(ReducerSpec(kind="pca", target_dim=6), x, seed=0)
        d0 = euclidean_distances(x, x)
        d1 = euclidean_distances(out.vectors, out.vectors)
        assert np.abs(d0 - d1).max() <= 1e-9

    def test_deterministic_across_calls(self):
        x = random_matrix(2, n=25, d=8)
        for kind in ("pca", "truncated_svd", "kernel_pca", "isomap",
                     "feature_agglomeration"):
            spec = ReducerSpec(kind=kind, target_dim=3)
            a = fit_transform(spec, x, seed=7)
            b = fit_transform(spec, x, seed=7)
            assert np.array_equal(a.vectors, b.vectors), kind

    def test_fit_prefix_matches_fit_only_run(self):
        x = random_matrix(3, n=40, d=10)
        for kind in ("pca", "truncated_svd", "kernel_pca", "isomap",
                     "feature_agglomeration"):
            spec = ReducerSpec(kind=kind, target_dim=4)
            both = fit_transform(spec, x, seed=0, n_fit=25)
            fit_only = fit_transform(spec, x[:25], seed=0)
            assert np.array_equal(both.vectors[:25], fit_only.vectors), kind


class TestPca:
    def test_hand_example(self):
        x = np.array([[1.0, 1.0], [-1.0, -1.0], [2.0, 2.0], [-2.0, -2.0]])
        out = pca(x, 1)
        s = np.sqrt(2.0)
        assert np.allclose(out[:, 0], [s, -s, 2 * s, -2 * s], atol=1e-12)

    def test_identical_rows_give_zeros(self):
        x = np.ones((6, 4)) * 3.25
        assert np.array_equal(pca(x, 2), np.zeros((6, 2)))

    def test_matches_power_iteration_oracle(self):
        for seed in range(3):
            x = random_matrix(seed, n=50, d=8)
            centered = x - x.mean(axis=0)
            _, oracle = power_eigh(centered.T @ centered, 3)
            assert principal_angle(probe_pca_basis(x, 3), oracle) < 1e-6

    def test_output_stats(self):
        x = random_matrix(4, n=60, d=10)
        out = pca(x, 5)
        cov = np.cov(out.T)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 1e-8
        variances = out.var(axis=0)
        assert (np.diff(variances) <= 1e-12).all()
        assert variances.sum() <= x.var(axis=0).sum() + 1e-9


class TestTruncatedSvd:
    def test_centered_input_equals_pca(self):
        x = random_matrix(5, n=30, d=6)
        x = x - x.mean(axis=0)
        assert np.abs(truncated_svd(x, 3) - pca(x, 3)).max() <= 1e-9

    def test_single_column_recovery(self):
        rng = np.random.default_rng(6)
        x = np.zeros((12, 5))
        x[:, 2] = rng.normal(size=12)
        out = truncated_svd(x, 1)
        assert np.allclose(np.abs(out[:, 0]), np.abs(x[:, 2]), atol=1e-12)

    def test_matches_power_iteration_oracle(self):
        for seed in range(3):
            x = random_matrix(seed + 10, n=40, d=7)
            _, oracle = power_eigh(x.T @ x, 3)
            assert principal_angle(probe_tsvd_basis(x, 3), oracle) < 1e-6

    def test_orthogonal_nonincreasing_components(self):
        # without centering the natural statistics are about the origin
        x = random_matrix(7, n=45, d=9)
        out = truncated_svd(x, 4)
        gram = out.T @ out
        assert np.abs(gram - np.diag(np.diag(gram))).max() < 1e-8
        assert (np.diff((out ** 2).mean(axis=0)) <= 1e-12).all()


def rbf_gram(x, gamma):
    d = euclidean_distances(x, x)
    return np.exp(-gamma * d ** 2)


class TestKernelPca:
    def test_duplicates_map_together(self):
        x = random_matrix(8, n=10, d=3)
        x[4] = x[1]
        out = kernel_pca(x, 2, rbf_gamma=0.5)
        assert np.allclose(out[4], out[1], atol=1e-10)

    def test_mirror_symmetry(self):
        rng = np.random.default_rng(9)
        half = rng.normal(size=(8, 2)) + [3.0, 0.0]
        x = np.vstack([half, half * [-1.0, 1.0]])  # reflection pairs rows i, i+8
        out = kernel_pca(x, 2, rbf_gamma=0.3)
        assert np.allclose(np.abs(out[8:]), np.abs(out[:8]), atol=1e-9)

    def test_identical_rows_flagged_degenerate(self):
        x = np.ones((5, 3))
        with pytest.warns(UserWarning, match="degenerate"):
            out = kernel_pca(x, 2, rbf_gamma=1.0)
        assert np.array_equal(out, np.zeros((5, 2)))

    def test_matches_dense_eigen_oracle(self):
        x = random_matrix(11, n=30, d=4)
        gamma = 0.25
        gram = rbf_gram(x, gamma)
        col = gram.mean(axis=0)
        centered = gram - col[None, :] - col[:, None] + gram.mean()
        lam, vec = power_eigh(centered, 2)
        # match the production sign rule before comparing coordinates
        for j in range(2):
            peak = np.argmax(np.abs(vec[:, j]))
            if vec[peak, j] < 0:
                vec[:, j] *= -1.0
        oracle = vec * np.sqrt(np.maximum(lam, 0.0))
        got = kernel_pca(x, 2, rbf_gamma=gamma)
        assert np.abs(got - oracle).max() <= 1e-6

    def test_auto_gamma_is_one_over_d(self):
        x = random_matrix(12, n=15, d=4)
        assert np.array_equal(kernel_pca(x, 2, "auto"),
                              kernel_pca(x, 2, rbf_gamma=0.25))


def quarter_circle(n=40, radius=10.0):
    angles = np.linspace(0.0, np.pi / 2, n)
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


def union_knn_adjacency(points, n_neighbors):
    """Independently built symmetric kNN graph, np.inf for absent edges."""
    dist = euclidean_distances(points, points)
    n = len(points)
    adj = np.full((n, n), np.inf)
    for i in range(n):
        ranked = sorted((dist[i, j], j) for j in range(n) if j != i)
        for d, j in ranked[:n_neighbors]:
            adj[i, j] = d
            adj[j, i] = d
    return adj


class TestIsomap:
    def test_collinear_points(self):
        t = np.arange(10.0)
        x = np.column_stack([t, 2 * t, -t])
        out = isomap(x, 1, n_neighbors=2)
        got = euclidean_distances(out, out)
        want = np.abs(t[:, None] - t[None, :]) * np.sqrt(6.0)
        assert np.abs(got - want).max() <= 1e-6 * want.max()

    def test_geodesic_dominates_euclidean(self):
        x = random_matrix(13, n=25, d=3)
        geo, _ = geodesic_distances(x, 4)
        assert (geo >= euclidean_distances(x, x) - 1e-9).all()

    def test_quarter_circle_arc_length(self):
        x = quarter_circle()
        geo, used = geodesic_distances(x, 3)
        assert used == 3
        arc = 5 * np.pi
        assert abs(geo[0, -1] - arc) / arc <= 0.03
        oracle = floyd_warshall(union_knn_adjacency(x, 3))
        assert geo[0, -1] == oracle[0, -1]
        # interior entries may differ by summation association order only
        assert np.abs(geo - oracle).max() <= 1e-12

    def test_connectivity_repair(self):
        # two clusters far apart: nn=1 leaves the graph disconnected
        x = np.vstack([random_matrix(14, n=6, d=2),
                       random_matrix(15, n=6, d=2) + 100.0])
        geo, used = geodesic_distances(x, 1)
        assert used > 1
        assert np.isfinite(geo).all()

    def test_duplicate_points_allowed(self):
        x = random_matrix(16, n=8, d=2)
        x[3] = x[0]
        geo, _ = geodesic_distances(x, 2)
        assert geo[0, 3] == 0.0
        assert np.isfinite(geo).all()

    def test_triangle_inequality(self):
        x = random_matrix(17, n=20, d=3)
        geo, _ = geodesic_distances(x, 3)
        lhs = geo[:, None, :]                      # g(i,k)
        rhs = geo[:, :, None] + geo[None, :, :]    # g(i,j) + g(j,k)
        assert (lhs <= rhs + 1e-9).all()
        assert np.allclose(geo, geo.T) and (np.diag(geo) == 0.0).all()

    def test_neighbor_resolution(self):
        assert resolve_isomap_neighbors("auto", n_fit=30, shot=1) == 5
        assert resolve_isomap_neighbors("auto", n_fit=30, shot=7) == 8
        assert resolve_isomap_neighbors("auto", n_fit=4, shot=7) == 3
        assert resolve_isomap_neighbors("auto", n_fit=30, shot=None) == 5
        assert resolve_isomap_neighbors(11, n_fit=30) == 11


class TestFeatureAgglomeration:
    def test_identical_columns_merge_first(self):
        rng = np.random.default_rng(18)
        a, b = rng.normal(size=(2, 10))
        x = np.column_stack([a, b, a])
        out = feature_agglomeration(x, 2)
        assert np.allclose(out[:, 0], a, atol=1e-12)
        assert np.allclose(out[:, 1], b, atol=1e-12)

    def test_target_equals_input_dim(self):
        x = random_matrix(19, n=12, d=5)
        assert np.array_equal(feature_agglomeration(x, 5), x)

    def test_matches_exhaustive_oracle(self):
        for seed in range(20):
            x = random_matrix(seed + 100, n=20, d=8)
            clusters = average_linkage_clusters(x.T, 3)
            want = np.column_stack([x[:, list(m)].mean(axis=1) for m in clusters])
            assert np.array_equal(feature_agglomeration(x, 3), want), seed


class TestExternal:
    def test_echo_round_trip(self, echo_stub):
        x = random_matrix(20, n=9, d=5)
        out = run_external(echo_stub, x, 3, seed=4)
        assert np.array_equal(out, x[:, :3])  # .17g survives the round trip

    def test_integrates_with_fit_transform(self, echo_stub):
        x = random_matrix(21, n=7, d=4)
        spec = ReducerSpec(kind="external", target_dim=2, command=echo_stub)
        out = fit_transform(spec, x, seed=0, n_fit=4)
        assert np.array_equal(out.vectors, x[:, :2])
        assert out.fit_row_count == 7  # protocol always fits on all rows

    def test_nonzero_exit(self, crash_stub):
        with pytest.raises(ReducerFailure, match="status 3"):
            run_external(crash_stub, random_matrix(22, n=4, d=3), 2, seed=0)

    def test_unlaunchable_command(self):
        with pytest.raises(ReducerFailure, match="launch"):
            run_external("/no/such/binary-xyz", random_matrix(23, n=3, d=3), 2, 0)

    @pytest.mark.parametrize("body,message", [
        ("print('1 2')", "output rows"),                        # too few rows
        ("[print('1 2 3') for _ in range(4)]", "fields"),       # wrong arity
        ("[print('a b') for _ in range(4)]", "unparseable"),
        ("[print('inf 2') for _ in range(4)]", "non-finite"),
    ])
    def test_malformed_output(self, tmp_path, body, message):
        stub = tmp_path / "bad.py"
        stub.write_text(f"import sys\nsys.stdin.read()\n{body}\n")
        with pytest.raises(ReducerFailure, match=message):
            run_external(f"{sys.executable} {stub}",
                         random_matrix(24, n=4, d=3), 2, seed=0)

    def test_failure_drops_cleanly_from_dispatch(self, crash_stub):
        spec = ReducerSpec(kind="external", target_dim=2, command=crash_stub)
        with pytest.raises(ReducerFailure):
            fit_transform(spec, random_matrix(25, n=4, d=3), seed=0)
