"""Tests for covariance estimation and structure tests.

Deterministic identities are checked exactly; calibration claims use seeded
Monte Carlo with measured rates noted where a bracket is asserted.
"""

import numpy as np
import pytest
from scipy import stats

from hidim.core import (
    DataMatrix,
    DimensionError,
    NumericalError,
    RngStream,
    TwoSample,
)
from hidim.covariance import (
    BandedEstimate,
    PenaltySpec,
    band_matrix,
    banded_covariance,
    equality_lrt,
    equality_lrt_corrected,
    gaussian_loglik_cov,
    gaussian_loglik_prec,
    identity_test_vn,
    identity_test_wn,
    li_chen_functional,
    li_chen_test,
    penalized_objective,
    projected_structure_test,
    schott_fn,
    schott_test,
    sphericity_test_un,
    u_functional,
    v_functional,
    w_functional,
    _li_chen_terms,
)


def _biased_cov(values):
    centered = values - values.mean(axis=0)
    return centered.T @ centered / values.shape[0]


def _ar_root(p, rho=0.6):
    sigma = rho ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.linalg.cholesky(sigma)


class TestBandMatrix:
    def test_width_one_keeps_only_diagonal(self):
        m = np.arange(16, dtype=float).reshape(4, 4)
        assert np.array_equal(band_matrix(m, 1), np.diag(np.diag(m)))

    def test_full_width_is_identity_operation(self):
        m = np.random.default_rng(0).standard_normal((5, 5))
        assert np.array_equal(band_matrix(m, 5), m)

    def test_strict_band_rule(self):
        m = np.ones((4, 4))
        banded = band_matrix(m, 2)
        i, j = np.indices((4, 4))
        assert np.all(banded[np.abs(i - j) >= 2] == 0.0)
        assert np.all(banded[np.abs(i - j) < 2] == 1.0)

    def test_rejects_bad_width_and_shape(self):
        with pytest.raises(DimensionError):
            band_matrix(np.ones((3, 3)), 0)
        with pytest.raises(DimensionError):
            band_matrix(np.ones((3, 2)), 1)


class TestBandedCovariance:
    def test_full_width_returns_sample_covariance(self):
        values = np.random.default_rng(1).standard_normal((40, 6))
        est = banded_covariance(values, k_candidates=[6], folds=4, rng=RngStream(2).child(0))
        assert np.max(np.abs(est.matrix - _biased_cov(values))) < 1e-12
        assert est.band_width == 6

    def test_width_one_returns_exact_diagonal(self):
        values = np.random.default_rng(2).standard_normal((30, 5))
        est = banded_covariance(values, k_candidates=[1], folds=3, rng=RngStream(3).child(0))
        assert np.array_equal(est.matrix, np.diag(np.diag(_biased_cov(values))))

    def test_identity_truth_selects_narrow_band(self):
        # 50 seeded replicates at n=200, p=30; measured: every run picks k=1
        stream = RngStream(100)
        widths = []
        for r in range(50):
            gen = stream.child(2 * r)
            x = gen.standard_normal((200, 30))
            widths.append(banded_covariance(x, folds=5, rng=stream.child(2 * r)).band_width)
        assert all(k in (1, 2) for k in widths), sorted(set(widths))

    def test_decaying_truth_selects_wider_band(self):
        stream = RngStream(100)
        root = _ar_root(30)
        id_widths, ar_widths = [], []
        for r in range(50):
            x = stream.child(2 * r).standard_normal((200, 30))
            id_widths.append(
                banded_covariance(x, folds=5, rng=stream.child(2 * r)).band_width
            )
            y = stream.child(2 * r + 1).standard_normal((200, 30)) @ root.T
            ar_widths.append(
                banded_covariance(y, folds=5, rng=stream.child(2 * r + 1)).band_width
            )
        assert np.median(ar_widths) > np.median(id_widths), (
            f"medians {np.median(ar_widths)} vs {np.median(id_widths)}"
        )

    def test_risk_curve_covers_candidates_and_selects_minimum(self):
        values = np.random.default_rng(5).standard_normal((50, 8))
        est = banded_covariance(
            values, k_candidates=[5, 1, 3], folds=5, rng=RngStream(6).child(0)
        )
        ks = [k for k, _ in est.cv_risk_curve]
        risks = [r for _, r in est.cv_risk_curve]
        assert ks == [1, 3, 5]
        assert est.band_width == ks[int(np.argmin(risks))]

    def test_estimate_has_exact_zeros_outside_band(self):
        values = np.random.default_rng(7).standard_normal((60, 10))
        est = banded_covariance(values, folds=5, rng=RngStream(8).child(0))
        i, j = np.indices(est.matrix.shape)
        assert np.all(est.matrix[np.abs(i - j) >= est.band_width] == 0.0)

    def test_preconditions(self):
        values = np.zeros((9, 3))
        with pytest.raises(DimensionError):
            banded_covariance(values, folds=1)
        with pytest.raises(DimensionError):
            banded_covariance(values, folds=5)  # n < 2 folds
        with pytest.raises(DimensionError):
            banded_covariance(np.zeros((20, 3)), k_candidates=[0], folds=2)
        with pytest.raises(DimensionError):
            banded_covariance(np.zeros((20, 3)), k_candidates=[4], folds=2)

    def test_estimate_validation(self):
        with pytest.raises(DimensionError):
            BandedEstimate(matrix=np.ones((3, 3)), band_width=1)
        est = BandedEstimate(matrix=np.diag([1.0, 2.0]), band_width=1)
        assert est.cv_risk_curve == ()


class TestGaussianLoglik:
    def test_scalar_case_matches_formula(self):
        values = np.random.default_rng(9).standard_normal((12, 1)) * 1.7
        s = _biased_cov(values)[0, 0]
        for var in (0.5, 1.0, 2.3):
            want = -(12 / 2.0) * (np.log(var) + 2.0 * s / var)
            got = gaussian_loglik_cov(np.array([[var]]), values)
            assert got == pytest.approx(want, rel=1e-12)

    def test_precision_form_matches_covariance_form(self):
        values = np.random.default_rng(10).standard_normal((25, 4))
        sigma = _biased_cov(values) + 0.5 * np.eye(4)
        a = gaussian_loglik_cov(sigma, values)
        b = gaussian_loglik_prec(np.linalg.inv(sigma), values)
        assert a == pytest.approx(b, abs=1e-8)

    def test_surface_peaks_at_twice_sample_covariance(self):
        # as written the objective carries a factor 2 on the trace term, so
        # its maximizer is 2S; evaluating at 2*Sigma recovers the true
        # Gaussian log-likelihood of Sigma up to the constant -(np/2) log 2
        values = np.random.default_rng(11).standard_normal((40, 3))
        s = _biased_cov(values)
        n, p = values.shape
        peak = gaussian_loglik_cov(2.0 * s, values)
        gen = np.random.default_rng(12)
        for _ in range(20):
            e = gen.standard_normal((3, 3)) * 0.05
            e = (e + e.T) / 2.0
            assert gaussian_loglik_cov(2.0 * s + e, values) <= peak + 1e-9

        sigma = s + 0.3 * np.eye(3)
        chol = np.linalg.cholesky(sigma)
        true_loglik = -(n / 2.0) * (
            2.0 * np.sum(np.log(np.diag(chol)))
            + np.trace(np.linalg.solve(sigma, s))
        )
        const = -(n * p / 2.0) * np.log(2.0)
        assert gaussian_loglik_cov(2.0 * sigma, values) == pytest.approx(
            true_loglik + const, rel=1e-10
        )

    def test_rejects_bad_matrices(self):
        values = np.zeros((5, 2))
        with pytest.raises(NumericalError):
            gaussian_loglik_cov(np.array([[1.0, 2.0], [2.0, 1.0]]), values)
        with pytest.raises(DimensionError):
            gaussian_loglik_cov(np.array([[1.0, 0.5], [0.0, 1.0]]), values)
        with pytest.raises(DimensionError):
            gaussian_loglik_cov(np.eye(3), values)


class TestPenalizedObjective:
    def _data(self, seed, n=30, p=4):
        return np.random.default_rng(seed).standard_normal((n, p))

    def test_zero_lambda_equals_loglik(self):
        values = self._data(13)
        sigma = _biased_cov(values) + 0.2 * np.eye(4)
        spec = PenaltySpec(kind="lasso", lambda1=0.0)
        assert penalized_objective(sigma, values, spec) == pytest.approx(
            gaussian_loglik_cov(sigma, values), rel=1e-12
        )

    def test_lasso_weights_enter_linearly(self):
        values = self._data(14)
        sigma = np.eye(4) * 2.0
        weights = np.full((4, 4), 0.5)
        spec = PenaltySpec(kind="lasso", lambda1=3.0, weights=weights)
        expected = gaussian_loglik_cov(sigma, values) - 3.0 * 0.5 * np.sum(np.abs(sigma))
        assert penalized_objective(sigma, values, spec) == pytest.approx(expected)

    def test_lasso_on_precision_target(self):
        values = self._data(15)
        omega = np.linalg.inv(_biased_cov(values) + 0.3 * np.eye(4))
        spec = PenaltySpec(kind="lasso", lambda1=1.0)
        expected = gaussian_loglik_prec(omega, values) - np.sum(np.abs(omega))
        got = penalized_objective(omega, values, spec, target="precision")
        assert got == pytest.approx(expected, rel=1e-12)

    def test_fused_identical_matrices_lose_no_agreement_term(self):
        d1, d2 = self._data(16), self._data(17)
        omega = np.linalg.inv(_biased_cov(d1) + 0.4 * np.eye(4))
        spec = PenaltySpec(kind="fused", lambda1=0.0, lambda2=7.0)
        got = penalized_objective([omega, omega], [d1, d2], spec, target="precision")
        want = gaussian_loglik_prec(omega, d1) + gaussian_loglik_prec(omega, d2)
        assert got == pytest.approx(want, rel=1e-12)

    def test_group_penalty_ignores_diagonals(self):
        d1, d2 = self._data(18), self._data(19)
        omegas = [np.diag([1.0, 2.0, 0.5, 1.5]), np.diag([2.0, 1.0, 1.0, 0.25])]
        spec = PenaltySpec(kind="group", lambda1=4.0, lambda2=9.0)
        got = penalized_objective(omegas, [d1, d2], spec, target="precision")
        want = sum(gaussian_loglik_prec(w, d) for w, d in zip(omegas, [d1, d2]))
        assert got == pytest.approx(want, rel=1e-12)

    def test_guo_reconstruction_and_penalty(self):
        d1, d2 = self._data(20), self._data(21)
        theta = np.array(
            [[1.0, 0.2, 0.0, 0.0],
             [0.2, 1.0, 0.1, 0.0],
             [0.0, 0.1, 1.0, 0.0],
             [0.0, 0.0, 0.0, 1.0]]
        )
        gammas = [np.ones((4, 4)), np.ones((4, 4)) - 0.1 * (1 - np.eye(4))]
        spec = PenaltySpec(kind="guo", lambda1=2.0, lambda2=3.0)
        got = penalized_objective((theta, gammas), [d1, d2], spec, target="precision")
        omegas = [theta * g for g in gammas]
        off = lambda a: np.sum(np.abs(a)) - np.sum(np.abs(np.diag(a)))
        want = (
            sum(gaussian_loglik_prec(w, d) for w, d in zip(omegas, [d1, d2]))
            - 2.0 * off(theta)
            - 3.0 * sum(off(g) for g in gammas)
        )
        assert got == pytest.approx(want, rel=1e-12)

    def test_monotone_decreasing_in_each_lambda(self):
        d1, d2 = self._data(22), self._data(23)
        base = np.linalg.inv(_biased_cov(d1) + 0.4 * np.eye(4))
        other = np.linalg.inv(_biased_cov(d2) + 0.4 * np.eye(4))
        for lam_index in (0, 1):
            values = []
            for lam in (0.0, 0.5, 1.0, 2.0, 8.0):
                lams = [1.0, 1.0]
                lams[lam_index] = lam
                spec = PenaltySpec(kind="fused", lambda1=lams[0], lambda2=lams[1])
                values.append(
                    penalized_objective([base, other], [d1, d2], spec, target="precision")
                )
            assert all(a >= b for a, b in zip(values, values[1:])), values

    def test_validation_errors(self):
        values = self._data(24)
        with pytest.raises(DimensionError):
            PenaltySpec(kind="ridge")
        with pytest.raises(DimensionError):
            PenaltySpec(kind="lasso", lambda1=-1.0)
        with pytest.raises(DimensionError):
            PenaltySpec(kind="fused", weights=np.ones((2, 2)))
        with pytest.raises(DimensionError):
            PenaltySpec(kind="lasso", weights=-np.ones((2, 2)))
        spec = PenaltySpec(kind="fused", lambda1=1.0)
        with pytest.raises(DimensionError, match="K >= 2"):
            penalized_objective([np.eye(4)], [values], spec, target="precision")
        with pytest.raises(DimensionError, match="precision"):
            penalized_objective([np.eye(4)] * 2, [values] * 2, spec, target="covariance")
        with pytest.raises(DimensionError):
            penalized_objective([np.eye(4)] * 2, [values] * 3, spec, target="precision")
        with pytest.raises(DimensionError, match="theta"):
            penalized_objective(
                np.eye(4), [values] * 2, PenaltySpec(kind="guo"), target="precision"
            )
        with pytest.raises(DimensionError):
            penalized_objective(np.eye(4), values, PenaltySpec(kind="lasso"), target="mean")


class TestSpectrumFunctionals:
    def test_u_zero_iff_equal_eigenvalues(self):
        for c in (0.5, 1.0, 3.0):
            assert u_functional(c * np.eye(6)) == 0.0
        q, _ = np.linalg.qr(np.random.default_rng(25).standard_normal((6, 6)))
        equal = q @ (2.0 * np.eye(6)) @ q.T
        assert u_functional(equal) < 1e-28
        unequal = q @ np.diag([2.0, 2.0, 2.0, 2.0, 2.0, 2.1]) @ q.T
        assert u_functional(unequal) > 1e-5

    def test_eigenvalue_form_equals_trace_form(self):
        gen = np.random.default_rng(26)
        a = gen.standard_normal((8, 8))
        sigma = a @ a.T / 8 + np.eye(8)
        eigs = np.linalg.eigvalsh(sigma)
        u_eig = float(np.mean((eigs / eigs.mean() - 1.0) ** 2))
        v_eig = float(np.mean((eigs - 1.0) ** 2))
        assert u_functional(sigma) == pytest.approx(u_eig, abs=1e-10)
        assert v_functional(sigma) == pytest.approx(v_eig, abs=1e-10)

    def test_w_scalar_identity_case_is_zero(self):
        for n in (2, 10, 100):
            assert w_functional(np.array([[1.0]]), n) == pytest.approx(0.0, abs=1e-15)

    def test_w_equals_v_in_limit(self):
        sigma = np.diag([1.0, 2.0, 3.0])
        assert w_functional(sigma, 10**9) == pytest.approx(v_functional(sigma), abs=1e-6)


class TestSphericityAndIdentity:
    def test_sphericity_exact_scale_invariance(self):
        values = np.random.default_rng(27).standard_normal((40, 6))
        a = sphericity_test_un(values)
        b = sphericity_test_un(173.5 * values)
        assert a.statistic == pytest.approx(b.statistic, rel=1e-10)
        assert a.p_value == pytest.approx(b.p_value, abs=1e-12)

    def test_sphericity_size_bracket(self):
        # N(0, 4I), n=200, p=5, 2000 replicates; measured size 0.0400
        stream = RngStream(101)
        rejections = sum(
            sphericity_test_un(2.0 * stream.child(r).standard_normal((200, 5))).p_value
            <= 0.05
            for r in range(2000)
        )
        assert 0.03 <= rejections / 2000 <= 0.08, rejections / 2000

    def test_sphericity_rejects_constant_data(self):
        with pytest.raises(NumericalError):
            sphericity_test_un(np.ones((10, 3)))

    def test_identity_null_dist_and_df(self):
        values = np.random.default_rng(28).standard_normal((30, 4))
        res_v = identity_test_vn(values)
        res_w = identity_test_wn(values)
        assert res_v.null_dist == "chi-square(10)"
        assert res_w.null_dist == "chi-square(10)"
        res_u = sphericity_test_un(values)
        assert res_u.null_dist == "chi-square(9)"

    def test_identity_size_w_bounded_and_below_v(self):
        # N(0, I), n=100, p=50, 1000 replicates; measured W 0.083, V 0.098
        stream = RngStream(102)
        rej_w = rej_v = 0
        for r in range(1000):
            x = stream.child(r).standard_normal((100, 50))
            rej_w += identity_test_wn(x).p_value <= 0.05
            rej_v += identity_test_vn(x).p_value <= 0.05
        assert rej_w / 1000 <= 0.10, rej_w / 1000
        assert rej_v > rej_w, (rej_v, rej_w)

    def test_identity_power_at_doubled_scale(self):
        stream = RngStream(103)
        rejections = sum(
            identity_test_wn(
                np.sqrt(2.0) * stream.child(r).standard_normal((100, 50))
            ).p_value
            <= 0.05
            for r in range(300)
        )
        assert rejections / 300 >= 0.9

    def test_statistic_scaling_is_np_over_two(self):
        values = np.random.default_rng(29).standard_normal((50, 3))
        res = sphericity_test_un(values)
        s = _biased_cov(values)
        assert res.statistic == pytest.approx(50 * 3 / 2 * u_functional(s), rel=1e-12)
        assert res.p_value == pytest.approx(
            float(stats.chi2.sf(res.statistic, 5)), abs=1e-14
        )


class TestEqualityLrt:
    def test_identical_groups_give_zero(self):
        values = np.random.default_rng(30).standard_normal((25, 4))
        res = equality_lrt([values, values.copy(), values.copy()])
        assert res.statistic == pytest.approx(0.0, abs=1e-9)
        assert res.p_value == pytest.approx(1.0, abs=1e-9)

    def test_two_group_display(self):
        gen = np.random.default_rng(31)
        x, y = gen.standard_normal((20, 3)), gen.standard_normal((30, 3))
        s1, s2 = _biased_cov(x), _biased_cov(y)
        pooled = (20 * s1 + 30 * s2) / 50
        want = 50 * np.linalg.slogdet(pooled)[1] - 20 * np.linalg.slogdet(s1)[1] \
            - 30 * np.linalg.slogdet(s2)[1]
        res = equality_lrt([x, y])
        assert res.statistic == pytest.approx(want, rel=1e-12)
        assert res.null_dist == "chi-square(6)"

    def test_statistic_nonnegative(self):
        stream = RngStream(32)
        for r in range(25):
            gen = stream.child(r)
            groups = [gen.standard_normal((15, 3)) for _ in range(3)]
            assert equality_lrt(groups).statistic >= -1e-9

    def test_size_bracket(self):
        # K=3, n_g=100, p=5, 2000 replicates; measured 0.0605
        stream = RngStream(104)
        rejections = 0
        for r in range(2000):
            gen = stream.child(r)
            groups = [gen.standard_normal((100, 5)) for _ in range(3)]
            rejections += equality_lrt(groups).p_value <= 0.05
        assert 0.03 <= rejections / 2000 <= 0.08, rejections / 2000

    def test_singular_group_named(self):
        good = np.random.default_rng(33).standard_normal((10, 4))
        bad = np.random.default_rng(34).standard_normal((3, 4))  # p >= n_g
        with pytest.raises(NumericalError, match="group 1"):
            equality_lrt([good, bad])

    def test_needs_two_groups_and_matching_columns(self):
        values = np.zeros((10, 3))
        with pytest.raises(DimensionError):
            equality_lrt([values])
        with pytest.raises(DimensionError):
            equality_lrt([values, np.zeros((10, 4))])


class TestEqualityLrtCorrected:
    def test_null_moments_match_monte_carlo(self):
        # p=3, n=m=10, 20000 replicates: the digamma/trigamma centering and
        # the Basu-independence variance formula against raw simulation
        stream = RngStream(105)
        reps = 20000
        draws = np.empty(reps)
        res = None
        for r in range(reps):
            gen = stream.child(r)
            s = TwoSample(
                DataMatrix(gen.standard_normal((10, 3))),
                DataMatrix(gen.standard_normal((10, 3))),
            )
            res = equality_lrt_corrected(s)
            draws[r] = res.diagnostics["l_raw"]
        mean_se = draws.std() / np.sqrt(reps)
        assert abs(draws.mean() - res.diagnostics["null_mean"]) < 4 * mean_se
        # variance of the sample variance via fourth-moment margin
        var_se = np.sqrt(
            (np.mean((draws - draws.mean()) ** 4) - draws.var() ** 2) / reps
        )
        assert abs(draws.var() - res.diagnostics["null_variance"]) < 4 * var_se

    def test_size_bracket_half_ratio(self):
        # p=100, n=m=200, 500 replicates; measured 0.0720
        stream = RngStream(106)
        rejections = 0
        for r in range(500):
            gen = stream.child(r)
            s = TwoSample(
                DataMatrix(gen.standard_normal((200, 100))),
                DataMatrix(gen.standard_normal((200, 100))),
            )
            rejections += equality_lrt_corrected(s).p_value <= 0.05
        assert 0.02 <= rejections / 500 <= 0.09, rejections / 500

    def test_power_at_doubled_covariance(self):
        stream = RngStream(107)
        rejections = 0
        for r in range(200):
            gen = stream.child(r)
            s = TwoSample(
                DataMatrix(gen.standard_normal((200, 100))),
                DataMatrix(np.sqrt(2.0) * gen.standard_normal((200, 100))),
            )
            rejections += equality_lrt_corrected(s).p_value <= 0.05
        assert rejections / 200 >= 0.9

    def test_identical_groups_deterministic_value(self):
        values = np.random.default_rng(35).standard_normal((20, 5))
        s = TwoSample(DataMatrix(values), DataMatrix(values.copy()))
        res = equality_lrt_corrected(s)
        assert np.isfinite(res.statistic)
        # L = 0 exactly, so the statistic is just the centering constant
        want = -res.diagnostics["null_mean"] / np.sqrt(res.diagnostics["null_variance"])
        assert res.statistic == pytest.approx(want, rel=1e-9)
        assert res.diagnostics["l_raw"] == pytest.approx(0.0, abs=1e-8)
        again = equality_lrt_corrected(s)
        assert again.statistic == res.statistic

    def test_preconditions(self):
        gen = np.random.default_rng(36)
        with pytest.raises(DimensionError, match="equal group sizes"):
            equality_lrt_corrected(
                TwoSample(
                    DataMatrix(gen.standard_normal((10, 3))),
                    DataMatrix(gen.standard_normal((12, 3))),
                )
            )
        with pytest.raises(DimensionError, match="p < n"):
            equality_lrt_corrected(
                TwoSample(
                    DataMatrix(gen.standard_normal((5, 6))),
                    DataMatrix(gen.standard_normal((5, 6))),
                )
            )


class TestSchott:
    def test_identical_groups_hand_oracle(self):
        # 4 x 2 dataset used as both groups: the pair term vanishes and the
        # functional equals minus the two bias corrections, assembled here
        # from definitional sums only
        x = np.array([[1.0, 2.0], [3.0, 5.0], [0.0, -1.0], [2.0, 2.0]])
        n = 4
        xbar = x.mean(axis=0)
        s = np.zeros((2, 2))
        for i in range(n):
            s += np.outer(x[i] - xbar, x[i] - xbar)
        s /= n
        tr_s = s[0, 0] + s[1, 1]
        tr_s2 = float(np.sum(s * s))
        eta = (n + 2) * (n - 1)
        bias = (n * (n - 2) * tr_s2 + n**2 * tr_s**2) / (n * eta)
        want = -(2 - 1) * (bias + bias)
        assert schott_fn([x, x.copy()]) == pytest.approx(want, rel=1e-12)

    def test_symmetric_under_group_order(self):
        gen = np.random.default_rng(37)
        a, b, c = (gen.standard_normal((12, 5)) for _ in range(3))
        assert schott_fn([a, b, c]) == pytest.approx(schott_fn([c, a, b]), rel=1e-12)

    @staticmethod
    def _exact_null_mean(sizes, p):
        # For N(0, I_p) groups with divisor-n covariances, Wishart moments
        # give E F_n = (K-1) sum_i [a(n_i^2-2) + b] / (n_i(n_i+2))
        #              - 2a sum_{i<j} (n_i-1)(n_j-1)/(n_i n_j)
        # with a = tr Sigma^2 = p, b = (tr Sigma)^2 = p^2; small but nonzero
        a, b = float(p), float(p) ** 2
        k = len(sizes)
        own = sum((a * (n**2 - 2) + b) / (n * (n + 2)) for n in sizes)
        cross = sum(
            (sizes[i] - 1) * (sizes[j] - 1) / (sizes[i] * sizes[j])
            for i in range(k)
            for j in range(i + 1, k)
        )
        return (k - 1) * own - 2 * a * cross

    def test_null_mean_matches_exact_moments(self):
        stream = RngStream(38)
        reps = 400
        for case, (sizes, p) in enumerate([((20, 20), 10), ((15, 25), 6)]):
            vals = np.empty(reps)
            for r in range(reps):
                gen = stream.child(10000 * case + r)
                vals[r] = schott_fn([gen.standard_normal((n, p)) for n in sizes])
            exact = self._exact_null_mean(sizes, p)
            se = vals.std() / np.sqrt(reps)
            assert abs(vals.mean() - exact) < 4 * se, (vals.mean(), exact, se)

    def test_permutation_size_bracket(self):
        # K=2, n=m=50, p=100, 199 permutations, 500 replicates; measured 0.036
        stream = RngStream(108)
        rejections = 0
        for r in range(500):
            gen = stream.child(r)
            groups = [gen.standard_normal((50, 100)), gen.standard_normal((50, 100))]
            rejections += schott_test(groups, permutations=199, rng=gen).p_value <= 0.05
        assert 0.03 <= rejections / 500 <= 0.07, rejections / 500

    def test_detects_strong_difference(self):
        gen = RngStream(39).child(0)
        groups = [gen.standard_normal((60, 10)),
                  3.0 * gen.standard_normal((60, 10))]
        res = schott_test(groups, permutations=199, rng=gen)
        assert res.p_value <= 0.01
        assert res.null_dist == "permutation(199)"

    def test_group_size_guard(self):
        with pytest.raises(DimensionError):
            schott_fn([np.zeros((1, 3)), np.zeros((10, 3))])
        with pytest.raises(DimensionError):
            schott_fn([np.zeros((10, 3))])


class TestLiChen:
    def test_terms_match_nested_loops(self):
        gen = np.random.default_rng(40)
        x, y = gen.standard_normal((6, 3)), gen.standard_normal((5, 3))
        xc = x - x.mean(axis=0)
        yc = y - y.mean(axis=0)
        a1 = 0.0
        for i in range(6):
            for j in range(6):
                if i != j:
                    a1 += float(xc[i] @ xc[j]) ** 2
        a1 /= 6 * 5
        a12 = 0.0
        for i in range(6):
            for j in range(5):
                a12 += float(xc[i] @ yc[j]) ** 2
        a12 /= 6 * 5
        got = _li_chen_terms(x, y)
        assert got[0] == pytest.approx(a1, rel=1e-12)
        assert got[2] == pytest.approx(a12, rel=1e-12)

    def test_a1_matches_exact_centered_expectation(self):
        # E A1 = p[(1-1/n)^2 + 2/n^2] + p(p-1)/n^2 for N(0, I): the column
        # centering shrinks it below tr(I^2) = p by about 2p/n
        p, n, reps = 10, 60, 800
        stream = RngStream(110)
        vals = np.empty(reps)
        for r in range(reps):
            gen = stream.child(r)
            vals[r] = _li_chen_terms(
                gen.standard_normal((n, p)), gen.standard_normal((n, p))
            )[0]
        exact = p * ((1 - 1 / n) ** 2 + 2 / n**2) + p * (p - 1) / n**2
        se = vals.std() / np.sqrt(reps)
        assert abs(vals.mean() - exact) < 4 * se, (vals.mean(), exact)
        assert abs(vals.mean() - p) < 0.05 * p

    def test_null_functional_matches_exact_expectation(self):
        # E(A1 + A2 - 2 A12) = p(p+1)(1/n^2 + 1/m^2) under equality, which
        # is near but not exactly zero
        p, n, reps = 10, 60, 800
        stream = RngStream(110)
        vals = np.empty(reps)
        for r in range(reps):
            gen = stream.child(r)
            a1, a2, a12 = _li_chen_terms(
                gen.standard_normal((n, p)), gen.standard_normal((n, p))
            )
            vals[r] = a1 + a2 - 2 * a12
        exact = p * (p + 1) * (2 / n**2)
        se = vals.std() / np.sqrt(reps)
        assert abs(vals.mean() - exact) < 4 * se, (vals.mean(), exact)
        assert abs(vals.mean()) < 0.1

    def test_duplicated_data_below_detection(self):
        # duplicating x as y breaks cross-sample independence: the paired
        # rows push the cross term up by about |x_i|^4 / n, so the
        # functional sits near -2p^2/n -- on the opposite side of the
        # rejection region, never mimicking a covariance difference
        gen = RngStream(41).child(0)
        x = gen.standard_normal((30, 40))
        s = TwoSample(DataMatrix(x), DataMatrix(x.copy()))
        functional = li_chen_functional(s)
        assert functional < 0.0
        assert abs(functional - (-2 * (40**2 + 2 * 40) / 30)) < 0.2 * abs(functional)
        res = li_chen_test(s, permutations=199, rng=gen)
        assert res.p_value >= 0.9, res.p_value

    def test_duplicated_data_small_p_functional_near_zero(self):
        # when p^2/n is small the duplication distortion is too: measured
        # ratio 0.054 at p=4, n=200
        gen = RngStream(41).child(1)
        x = gen.standard_normal((200, 4))
        s = TwoSample(DataMatrix(x), DataMatrix(x.copy()))
        functional = li_chen_functional(s)
        a1 = _li_chen_terms(x, x)[0]
        assert abs(functional) < 0.1 * a1, (functional, a1)
        assert li_chen_test(s, permutations=199, rng=gen).p_value >= 0.9

    def test_exact_location_invariance(self):
        gen = np.random.default_rng(42)
        x, y = gen.standard_normal((10, 6)), gen.standard_normal((12, 6))
        shift = np.linspace(-4, 4, 6)
        a = li_chen_functional(TwoSample(DataMatrix(x), DataMatrix(y)))
        b = li_chen_functional(TwoSample(DataMatrix(x + shift), DataMatrix(y + shift)))
        assert a == pytest.approx(b, rel=1e-10)

    def test_permutation_size_sanity(self):
        # n=m=30, p=40, 199 permutations, 200 replicates; measured ~0.05
        stream = RngStream(111)
        rejections = 0
        for r in range(200):
            gen = stream.child(r)
            s = TwoSample(
                DataMatrix(gen.standard_normal((30, 40))),
                DataMatrix(gen.standard_normal((30, 40))),
            )
            rejections += li_chen_test(s, permutations=199, rng=gen).p_value <= 0.05
        assert 0.02 <= rejections / 200 <= 0.10, rejections / 200

    def test_detects_scale_difference(self):
        gen = RngStream(43).child(0)
        s = TwoSample(
            DataMatrix(gen.standard_normal((40, 20))),
            DataMatrix(2.0 * gen.standard_normal((40, 20))),
        )
        assert li_chen_test(s, permutations=199, rng=gen).p_value <= 0.01

    def test_minimum_sizes(self):
        gen = np.random.default_rng(44)
        s = TwoSample(
            DataMatrix(gen.standard_normal((3, 4))),
            DataMatrix(gen.standard_normal((10, 4))),
        )
        with pytest.raises(DimensionError):
            li_chen_functional(s)


class TestProjectedStructure:
    def test_full_projection_preserves_sphericity_statistic(self):
        values = np.random.default_rng(45).standard_normal((30, 8))
        base = sphericity_test_un(values)
        proj = projected_structure_test(
            values, k=8, which="sphericity", rng=RngStream(46).child(0)
        )
        assert proj.statistic == pytest.approx(base.statistic, rel=1e-10)
        assert proj.method == "projected_sphericity"

    def test_sphericity_size_bracket(self):
        # sigma^2 = 1.7^2, n=100, p=60, k=10, 800 replicates; measured 0.0500
        stream = RngStream(113)
        rejections = 0
        for r in range(800):
            gen = stream.child(r)
            x = 1.7 * gen.standard_normal((100, 60))
            rejections += (
                projected_structure_test(x, k=10, which="sphericity", rng=gen).p_value
                <= 0.05
            )
        assert 0.02 <= rejections / 800 <= 0.10, rejections / 800

    def test_identity_size_bracket(self):
        # N(0, I), n=100, p=60, k=10, 800 replicates; measured 0.0462
        stream = RngStream(113)
        rejections = 0
        for r in range(800):
            gen = stream.child(10000 + r)
            x = gen.standard_normal((100, 60))
            rejections += (
                projected_structure_test(x, k=10, which="identity", rng=gen).p_value
                <= 0.05
            )
        assert 0.02 <= rejections / 800 <= 0.10, rejections / 800

    def test_diagnostics_and_validation(self):
        values = np.random.default_rng(47).standard_normal((20, 6))
        res = projected_structure_test(
            values, k=3, which="identity", rng=RngStream(48).child(0)
        )
        assert res.diagnostics["k"] == 3.0
        with pytest.raises(DimensionError):
            projected_structure_test(values, k=7, which="identity")
        with pytest.raises(DimensionError):
            projected_structure_test(values, k=3, which="rank")
