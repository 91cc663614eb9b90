"""Tests for projection-based mean tests and projection generators."""

import numpy as np
import pytest
from scipy import stats

from hidim import (
    DimensionError,
    NumericalError,
    ProjectionSpec,
    RngStream,
    TwoSample,
    generate_projection,
    hotelling_t2,
    projected_hotelling,
    raptt,
    raptt_cutoff,
    scan_k,
    sym_eigen,
    t2_random_projection,
)
from hidim.core import pooled_covariance
from hidim.projection import _batched_hotelling_pvalues, _draw_projection_batch


def _gaussian_two_sample(rng, n, m, p, shift=0.0, scale=None):
    scale = np.ones(p) if scale is None else scale
    x = rng.standard_normal((n, p)) * scale
    y = rng.standard_normal((m, p)) * scale + shift
    return TwoSample.from_arrays(x, y)


class TestProjectionSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ProjectionSpec(kind="fourier", k=3, seed=RngStream(0))

    def test_k_must_be_positive(self):
        with pytest.raises(DimensionError):
            ProjectionSpec(kind="gaussian", k=0, seed=RngStream(0))

    def test_theta_only_for_sparse(self):
        with pytest.raises(ValueError, match="sparse"):
            ProjectionSpec(kind="gaussian", k=3, seed=RngStream(0), theta=3.0)

    def test_theta_below_one(self):
        with pytest.raises(ValueError):
            ProjectionSpec(kind="sparse", k=3, seed=RngStream(0), theta=0.5)

    def test_seed_must_be_stream(self):
        with pytest.raises(TypeError):
            ProjectionSpec(kind="gaussian", k=3, seed=7)


class TestGenerateProjection:
    def test_reproducible_bit_exact(self):
        for kind in ("gaussian", "sparse", "haar_orthogonal"):
            spec = ProjectionSpec(kind=kind, k=6, seed=RngStream(42))
            a = generate_projection(spec, 30).values
            b = generate_projection(spec, 30).values
            assert np.array_equal(a, b), f"{kind} draw not reproducible"

    def test_distinct_streams_differ(self):
        a = generate_projection(
            ProjectionSpec(kind="gaussian", k=6, seed=RngStream(42, 0)), 30
        ).values
        b = generate_projection(
            ProjectionSpec(kind="gaussian", k=6, seed=RngStream(42, 1)), 30
        ).values
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize(
        "kind,fourth_central",
        [("gaussian", 2.0), ("uniform_sqrt3", 0.8), ("sparse", 2.0)],
    )
    def test_entry_moments(self, kind, fourth_central):
        # mean 0 and second moment 1, to Monte Carlo accuracy over k*p entries
        theta = 3.0 if kind == "sparse" else None
        spec = ProjectionSpec(kind=kind, k=40, seed=RngStream(3), theta=theta)
        values = generate_projection(spec, 250).values
        count = values.size
        assert abs(values.mean()) < 4.0 / np.sqrt(count)
        m2 = np.mean(values**2)
        assert abs(m2 - 1.0) < 4.0 * np.sqrt(fourth_central / count), (
            f"{kind}: second moment {m2:.4f} too far from 1"
        )

    def test_sign_entries(self):
        spec = ProjectionSpec(kind="sign", k=20, seed=RngStream(5))
        values = generate_projection(spec, 100).values
        assert np.all(np.abs(values) == 1.0)
        assert abs(values.mean()) < 4.0 / np.sqrt(values.size)

    def test_uniform_bounded(self):
        spec = ProjectionSpec(kind="uniform_sqrt3", k=20, seed=RngStream(6))
        values = generate_projection(spec, 100).values
        assert np.all(np.abs(values) < np.sqrt(3.0))

    def test_sparse_zero_fraction(self):
        spec = ProjectionSpec(kind="sparse", k=60, seed=RngStream(7), theta=3.0)
        values = generate_projection(spec, 200).values
        q = 2.0 / 3.0
        freq = np.mean(values == 0.0)
        tol = 3.0 * np.sqrt(q * (1 - q) / values.size)
        assert abs(freq - q) < tol, f"zero fraction {freq:.4f} vs 2/3 +- {tol:.4f}"

    def test_sparse_default_theta_is_sqrt_p(self):
        spec = ProjectionSpec(kind="sparse", k=30, seed=RngStream(8))
        values = generate_projection(spec, 81).values  # sqrt(theta) = 81**0.25 = 3
        assert set(np.unique(values)).issubset({-3.0, 0.0, 3.0})

    def test_haar_rows_orthonormal(self):
        spec = ProjectionSpec(kind="haar_orthogonal", k=7, seed=RngStream(9))
        r = generate_projection(spec, 40).values
        assert np.max(np.abs(r @ r.T - np.eye(7))) < 1e-10

    @pytest.mark.parametrize("kind", ["haar_orthogonal", "block_weighted"])
    def test_k_larger_than_p_rejected(self, kind):
        spec = ProjectionSpec(kind=kind, k=11, seed=RngStream(0))
        with pytest.raises(DimensionError):
            generate_projection(spec, 10)

    def test_block_weighted_structure(self):
        spec = ProjectionSpec(kind="block_weighted", k=4, seed=RngStream(1))
        r = generate_projection(spec, 10).values
        # disjoint supports covering every column, unit row norms
        support = r != 0
        assert np.all(support.sum(axis=0) == 1)
        np.testing.assert_allclose(np.sum(r**2, axis=1), 1.0, atol=1e-12)
        other = generate_projection(
            ProjectionSpec(kind="block_weighted", k=4, seed=RngStream(99)), 10
        ).values
        assert np.array_equal(r, other), "block projection should be deterministic"

    def test_block_weighted_awkward_split_keeps_rank(self):
        # k=7, p=10 leaves empty blocks under naive ceil(p/k) slicing
        spec = ProjectionSpec(kind="block_weighted", k=7, seed=RngStream(1))
        r = generate_projection(spec, 10).values
        assert np.linalg.matrix_rank(r) == 7

    def test_degenerate_sparse_draw_raises(self):
        spec = ProjectionSpec(kind="sparse", k=3, seed=RngStream(5), theta=1e6)
        with pytest.raises(NumericalError):
            generate_projection(spec, 4)

    @pytest.mark.parametrize(
        "kind", ["gaussian", "uniform_sqrt3", "sign", "sparse", "haar_orthogonal", "block_weighted"]
    )
    def test_full_row_rank(self, kind):
        spec = ProjectionSpec(kind=kind, k=5, seed=RngStream(11))
        r = generate_projection(spec, 12)
        assert np.linalg.matrix_rank(r.values) == 5
        assert r.k == 5 and r.p == 12


class TestProjectedHotelling:
    def test_full_k_equals_hotelling(self):
        rng = np.random.default_rng(0)
        s = _gaussian_two_sample(rng, 20, 25, 8)
        full = hotelling_t2(s)
        proj = projected_hotelling(s, 8)
        assert abs(full.statistic - proj.statistic) < 1e-8
        assert abs(full.p_value - proj.p_value) < 1e-8

    def test_identical_groups_zero(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((15, 6))
        s = TwoSample.from_arrays(x, x.copy())
        res = projected_hotelling(s, 3)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_matches_explicit_projection_oracle(self):
        # project onto the top-k eigenvectors by hand, then run the classical
        # two-sample statistic on the k-dimensional data
        rng = np.random.default_rng(2)
        n, m, p, k = 30, 35, 10, 4
        s = _gaussian_two_sample(rng, n, m, p)
        cov = pooled_covariance(s)
        w, v = np.linalg.eigh(cov)
        u = v[:, np.argsort(w)[::-1][:k]]
        xs = s.x.values @ u
        ys = s.y.values @ u
        xc = xs - xs.mean(axis=0)
        yc = ys - ys.mean(axis=0)
        pooled = (xc.T @ xc + yc.T @ yc) / (n + m - 2)
        d = xs.mean(axis=0) - ys.mean(axis=0)
        quad = d @ np.linalg.solve(pooled, d)
        expect = (n + m - k - 1) / ((n + m - 2) * k) * (n * m / (n + m)) * quad
        res = projected_hotelling(s, k)
        assert abs(res.statistic - expect) < 1e-10 * max(1.0, expect)

    def test_matches_random_projection_on_top_eigvecs(self):
        rng = np.random.default_rng(3)
        s = _gaussian_two_sample(rng, 20, 20, 8)
        k = 3
        _, vectors = sym_eigen(pooled_covariance(s))
        r = vectors[:, :k].T
        a = projected_hotelling(s, k)
        b = t2_random_projection(s, r)
        assert abs(a.p_value - b.p_value) < 1e-8
        assert abs(a.statistic - b.statistic) < 1e-8

    def test_detects_figure_style_shift(self):
        rng = np.random.default_rng(4)
        sd = np.sqrt(rng.uniform(2, 3, size=50))
        s = _gaussian_two_sample(rng, 100, 100, 50, shift=1.0, scale=sd)
        assert projected_hotelling(s, 10).p_value <= 0.05

    def test_k_out_of_range(self):
        rng = np.random.default_rng(5)
        s = _gaussian_two_sample(rng, 20, 20, 8)
        for bad in (0, 9, 40):
            with pytest.raises(DimensionError):
                projected_hotelling(s, bad)

    def test_k_beyond_rank_raises(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((10, 3))
        y = rng.standard_normal((12, 3))
        # duplicate a column: pooled covariance has rank 3, not 4
        s = TwoSample.from_arrays(
            np.column_stack([x, x[:, 0]]), np.column_stack([y, y[:, 0]])
        )
        with pytest.raises(NumericalError, match="positive eigenvalues"):
            projected_hotelling(s, 4)


class TestScanK:
    def test_matches_pointwise_calls(self):
        rng = np.random.default_rng(7)
        s = _gaussian_two_sample(rng, 25, 30, 12)
        swept = scan_k(s, [1, 3, 7, 12])
        for k, p_value in swept:
            assert abs(p_value - projected_hotelling(s, k).p_value) < 1e-12

    def test_full_k_recovers_hotelling_p(self):
        rng = np.random.default_rng(8)
        s = _gaussian_two_sample(rng, 30, 30, 10)
        assert abs(scan_k(s, [10])[0][1] - hotelling_t2(s).p_value) < 1e-10

    def test_empty_range(self):
        rng = np.random.default_rng(9)
        s = _gaussian_two_sample(rng, 10, 10, 4)
        assert scan_k(s, []) == []

    def test_null_rejection_fraction_conservative(self):
        # eigen-selection inflates the top-k denominators, so the null
        # rejection rate sits far below alpha (measured ~2e-4 at this config)
        rng = np.random.default_rng(10)
        fractions = []
        for _ in range(200):
            s = _gaussian_two_sample(rng, 50, 50, 25)
            p_values = np.array([q for _, q in scan_k(s, range(1, 21))])
            fractions.append(np.mean(p_values < 0.05))
        mean_frac = float(np.mean(fractions))
        assert mean_frac <= 0.02, f"null scan rejection fraction {mean_frac:.4f}"

    def test_rank_deficient_sweep_high_dim(self):
        # p far above n+m-2: only the positive spectrum is scannable
        rng = np.random.default_rng(11)
        s = _gaussian_two_sample(rng, 5, 5, 20)
        swept = scan_k(s, range(1, 9))  # n+m-2 = 8 usable directions
        assert len(swept) == 8
        with pytest.raises(DimensionError):
            scan_k(s, [9])

    def test_p_value_rises_with_k_when_p_dominates(self):
        # p=500 against n=10, m=20 and a strong shift: adding directions
        # mostly adds noise, so the p-value trend over k is upward
        from scipy.stats import kendalltau

        rng = np.random.default_rng(12)
        for _ in range(3):
            sd = np.sqrt(rng.uniform(2, 3, size=500))
            s = _gaussian_two_sample(rng, 10, 20, 500, shift=1.0, scale=sd)
            swept = scan_k(s, range(1, 29))
            tau = kendalltau([k for k, _ in swept], [q for _, q in swept]).statistic
            assert tau > 0, f"expected rising p-value trend, tau={tau:.3f}"


class TestT2RandomProjection:
    def test_identity_projection_recovers_hotelling(self):
        rng = np.random.default_rng(13)
        s = _gaussian_two_sample(rng, 20, 22, 8)
        full = hotelling_t2(s)
        res = t2_random_projection(s, np.eye(8))
        assert abs(res.statistic - full.statistic) < 1e-10
        assert abs(res.p_value - full.p_value) < 1e-10

    @pytest.mark.parametrize("kind", ["gaussian", "sign", "sparse"])
    def test_invariant_under_left_multiplication(self, kind):
        rng = np.random.default_rng(14)
        s = _gaussian_two_sample(rng, 25, 25, 12)
        r = generate_projection(
            ProjectionSpec(kind=kind, k=4, seed=RngStream(21)), 12
        ).values
        a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        base = t2_random_projection(s, r)
        mapped = t2_random_projection(s, a @ r)
        assert abs(base.statistic - mapped.statistic) < 1e-8
        assert abs(base.p_value - mapped.p_value) < 1e-8

    def test_conditional_size_with_fresh_projections(self):
        # k = (n+m)/2; fresh data and fresh gaussian R each replicate --
        # conditionally on R the null law is exactly F, so size tracks alpha
        rng = np.random.default_rng(15)
        n = m = 15
        p, k, reps = 40, 15, 2000
        data = rng.standard_normal((reps, n + m, p))
        flat_r = rng.standard_normal((reps, k, p))
        z = np.matmul(data, flat_r.transpose(0, 2, 1))
        p_values = _batched_hotelling_pvalues(z, n, k)
        size = float(np.mean(p_values <= 0.05))
        assert 0.03 <= size <= 0.07, f"conditional size {size:.4f}"
        # dual route: the batched kernel must agree with the public test
        for i in range(25):
            s = TwoSample.from_arrays(data[i, :n], data[i, n:])
            public = t2_random_projection(s, flat_r[i])
            assert abs(public.p_value - p_values[i]) < 1e-12

    def test_k_must_be_small(self):
        rng = np.random.default_rng(16)
        s = _gaussian_two_sample(rng, 10, 10, 30)
        with pytest.raises(DimensionError):
            t2_random_projection(s, rng.standard_normal((18, 30)))

    def test_singular_projected_covariance(self):
        rng = np.random.default_rng(17)
        s = _gaussian_two_sample(rng, 15, 15, 6)
        r = np.vstack([np.eye(6)[0], np.eye(6)[0]])  # duplicated row
        with pytest.raises(NumericalError):
            t2_random_projection(s, r)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(18)
        s = _gaussian_two_sample(rng, 15, 15, 6)
        with pytest.raises(DimensionError):
            t2_random_projection(s, rng.standard_normal((2, 9)))


class TestRaptt:
    def test_reproducible_from_seed(self):
        rng = np.random.default_rng(19)
        s = _gaussian_two_sample(rng, 12, 14, 30)
        a = raptt(s, n_projections=5, null_reps=50, rng=RngStream(3), k=6)
        b = raptt(s, n_projections=5, null_reps=50, rng=RngStream(3), k=6)
        assert a.statistic == b.statistic
        assert a.p_value == b.p_value

    def test_single_projection_matches_direct_test(self):
        # with one projection, pbar is exactly the one-projection p-value
        rng = np.random.default_rng(20)
        s = _gaussian_two_sample(rng, 12, 14, 30)
        k = 6
        res = raptt(s, n_projections=1, kind="gaussian", null_reps=50,
                    rng=RngStream(77), k=k)
        gen = RngStream(77).generator()
        r = _draw_projection_batch(gen, "gaussian", 1, k, 30, None)[0]
        direct = t2_random_projection(s, r)
        assert abs(res.statistic - direct.p_value) < 1e-12

    def test_input_validation(self):
        rng = np.random.default_rng(21)
        s = _gaussian_two_sample(rng, 12, 14, 30)
        with pytest.raises(ValueError):
            raptt(s, n_projections=0, null_reps=50, rng=RngStream(0))
        with pytest.raises(ValueError):
            raptt(s, null_reps=10, rng=RngStream(0))
        with pytest.raises(DimensionError):
            raptt(s, null_reps=50, rng=RngStream(0), k=24)  # k >= n+m-2
        with pytest.raises(DimensionError):
            raptt(s, null_reps=50, rng=RngStream(0), k=31)  # k > p
        with pytest.raises(ValueError):
            raptt(s, null_reps=50, rng=RngStream(0), alpha=1.5)

    def test_detects_large_shift(self):
        rng = np.random.default_rng(22)
        s = _gaussian_two_sample(rng, 30, 30, 50, shift=1.0)
        res = raptt(s, n_projections=10, null_reps=60, rng=RngStream(5))
        assert res.p_value <= 0.05
        assert res.diagnostics["reject"] == 1.0

    def test_result_fields(self):
        rng = np.random.default_rng(23)
        s = _gaussian_two_sample(rng, 12, 14, 20)
        res = raptt(s, n_projections=4, null_reps=50, rng=RngStream(1))
        assert 0.0 <= res.statistic <= 1.0
        assert 0.0 < res.p_value <= 1.0
        assert res.null_dist == "empirical(50)"
        assert res.diagnostics["k"] == (12 + 14) // 2
        assert res.diagnostics["reject"] == float(res.p_value <= 0.05)
        assert 0.0 <= res.diagnostics["cutoff_alpha_quantile"] <= 1.0
        assert 0.0 <= res.diagnostics["psi_alpha"] <= 1.0

    def test_non_haar_kinds_run(self):
        rng = np.random.default_rng(24)
        s = _gaussian_two_sample(rng, 12, 14, 20)
        for kind in ("sign", "sparse", "uniform_sqrt3"):
            theta = 2.0 if kind == "sparse" else None
            res = raptt(s, n_projections=3, kind=kind, null_reps=50,
                        rng=RngStream(2), k=5, theta=theta)
            assert 0.0 < res.p_value <= 1.0


class TestRapttCutoff:
    def test_monotone_non_increasing_in_alpha(self):
        rng = np.random.default_rng(25)
        values = rng.random(173)
        grid = np.linspace(0.01, 0.99, 57)
        cutoffs = [raptt_cutoff(values, a) for a in grid]
        assert all(c1 >= c2 for c1, c2 in zip(cutoffs, cutoffs[1:]))

    def test_extremes_hit_order_statistics(self):
        values = [0.2, 0.5, 0.9]
        assert raptt_cutoff(values, 0.999) == 0.2
        assert raptt_cutoff(values, 0.001) == 0.9

    def test_validation(self):
        with pytest.raises(ValueError):
            raptt_cutoff([], 0.05)
        with pytest.raises(ValueError):
            raptt_cutoff([0.5], 1.5)


class TestDistancePreservation:
    def test_orthogonal_projection_preserves_distances_on_average(self):
        # E ||R(x-y)||^2 * (p/k) = ||x-y||^2 for orthonormal-row projections
        rng = np.random.default_rng(26)
        p, k, draws = 40, 10, 1000
        x = rng.standard_normal(p)
        y = rng.standard_normal(p)
        gen = RngStream(31).generator()
        r = _draw_projection_batch(gen, "haar_orthogonal", draws, k, p, None)
        projected = r @ (x - y)
        estimate = float(np.mean(np.sum(projected**2, axis=1))) * (p / k)
        truth = float(np.sum((x - y) ** 2))
        assert abs(estimate - truth) <= 0.05 * truth, (
            f"scaled projected distance {estimate:.3f} vs {truth:.3f}"
        )
