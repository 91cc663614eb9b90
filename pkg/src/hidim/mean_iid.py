"""Two-sample mean-vector tests for independent observations.

Covers the classical Hotelling test and its high-dimensional replacements:
sum-of-t tests, trace-normalized tests built on leave-out U-statistics,
scale-invariant diagonal variants, per-column aggregate tests supporting
missing data, the maximum-coordinate (extreme-value) test, and a Bayes-factor
test.  All tests share the convention that the alternative is a two-sided
mean difference and the reported p-value is the upper tail of the stated null
law unless the descriptor says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from .core import (
    DimensionError,
    NumericalError,
    RngLike,
    TestResult,
    TwoSample,
    as_generator,
    pooled_covariance,
)

__all__ = [
    "TraceEstimates",
    "hotelling_t2",
    "chung_fraser",
    "dempster",
    "bai_saranadasa",
    "cq_trace_estimates",
    "chen_qin",
    "srivastava_du",
    "park_ayyala",
    "pct",
    "gct_aggregate",
    "clx_max_test",
    "zoh_bayes_factor",
    "assumption_diagnostics",
    "condition_ratios",
]


@dataclass(frozen=True)
class TraceEstimates:
    """Leave-out U-statistic estimates of tr(S1^2), tr(S2^2), tr(S1 S2)."""

    tr_s1_sq: float
    tr_s2_sq: float
    tr_s1_s2: float


def _mean_difference(s: TwoSample) -> np.ndarray:
    return s.x.values.mean(axis=0) - s.y.values.mean(axis=0)


def _tau(n: int, m: int) -> float:
    return n * m / (n + m)


# ---------------------------------------------------------------------------
# classical and trace-normalized tests


def hotelling_t2(s: TwoSample) -> TestResult:
    """Hotelling's two-sample T^2, in its F-scaled form.

    The statistic includes the (n+m-p-1)/((n+m-2)p) factor, so it follows
    F(p, n+m-p-1) exactly under Gaussian sampling; at p = 1 it reduces to the
    squared pooled t statistic.

    Raises
    ------
    DimensionError
        If p >= n + m - 1 (the pooled covariance cannot be inverted).
    NumericalError
        If the pooled covariance is numerically singular.
    """
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    if p >= big_n - 1:
        raise DimensionError(
            f"Hotelling needs p < n + m - 1 (got p={p}, n+m={big_n})"
        )
    cov = pooled_covariance(s)
    eigs = np.linalg.eigvalsh(cov)
    tol = 1e-12 * np.trace(cov) / p
    if eigs.min() <= tol:
        raise NumericalError(
            f"pooled covariance is singular (min eigenvalue {eigs.min():.3e})"
        )
    d = _mean_difference(s)
    maha = float(d @ np.linalg.solve(cov, d))
    df2 = big_n - p - 1
    stat = (df2 / ((big_n - 2) * p)) * _tau(n, m) * maha
    pval = float(stats.f.sf(stat, p, df2))
    return TestResult(
        method="hotelling_t2",
        statistic=stat,
        p_value=pval,
        null_dist=f"F({p},{df2})",
        diagnostics={"mahalanobis": maha},
    )


def _cf_statistic(x: np.ndarray, y: np.ndarray) -> float:
    n, m = x.shape[0], y.shape[0]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    diag = ((xc * xc).sum(axis=0) + (yc * yc).sum(axis=0)) / (n + m - 2)
    diff = np.abs(x.mean(axis=0) - y.mean(axis=0))
    return float(np.sum(diff / diag))


def chung_fraser(
    s: TwoSample, permutations: int = 999, rng: RngLike = None
) -> TestResult:
    """Sum of per-column scaled mean differences, permutation calibrated.

    Each column contributes |Xbar_k - Ybar_k| / S_kk with S_kk the pooled
    variance of column k (not its square root — the statistic is deliberately
    kept in that unusual scaling).  The p-value comes from group-label
    permutations: p = (1 + #{permuted >= observed}) / (B + 1).
    """
    x, y = s.x.values, s.y.values
    n, m = s.n, s.m
    diag = np.diag(pooled_covariance(s))
    if np.any(diag <= 0):
        raise NumericalError("zero-variance column in pooled covariance")
    pooled = s.pooled_rows()
    observed = _cf_statistic(x, y)

    # permutations vectorized through the fixed pooled column sums:
    # pooled diag = (Q - n xbar^2 - m ybar^2) / (n + m - 2) for any relabeling
    gen = as_generator(rng)
    total = pooled.sum(axis=0)
    q_total = (pooled * pooled).sum(axis=0)
    count = 0
    chunk = max(1, min(permutations, int(2e7 // (n * s.p + 1))))
    done = 0
    while done < permutations:
        b = min(chunk, permutations - done)
        # b random n-subsets via argpartition of uniforms
        u = gen.random((b, n + m))
        idx = np.argpartition(u, n - 1, axis=1)[:, :n]
        sel = pooled[idx]  # (b, n, p)
        sx = sel.sum(axis=1)
        xbar = sx / n
        ybar = (total - sx) / m
        diag_b = (q_total - n * xbar**2 - m * ybar**2) / (n + m - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.abs(xbar - ybar) / diag_b
        # a split can zero out a column's pooled variance; 0/0 contributes
        # nothing, |diff|/0 counts as maximally extreme
        terms = np.where(np.isnan(terms), 0.0, terms)
        stats_b = terms.sum(axis=1)
        count += int(np.sum(stats_b >= observed))
        done += b
    pval = (1.0 + count) / (permutations + 1.0)
    return TestResult(
        method="chung_fraser",
        statistic=observed,
        p_value=pval,
        null_dist=f"permutation({permutations})",
        diagnostics={},
    )


def dempster(s: TwoSample) -> TestResult:
    """Trace-normalized mean-difference test with an F reference.

    statistic = (nm/(n+m)) ||Xbar - Ybar||^2 / tr(S); the effective dimension
    r = tr^2(S)/tr(S^2) sets the null F(r, (n+m-2) r).
    """
    n, m = s.n, s.m
    cov = pooled_covariance(s)
    tr = float(np.trace(cov))
    if tr <= 0:
        raise NumericalError("zero residual variation: tr(S) is not positive")
    tr_sq = float(np.sum(cov * cov))
    d = _mean_difference(s)
    stat = _tau(n, m) * float(d @ d) / tr
    r_hat = tr * tr / tr_sq
    df2 = (n + m - 2) * r_hat
    pval = float(stats.f.sf(stat, r_hat, df2))
    return TestResult(
        method="dempster",
        statistic=stat,
        p_value=pval,
        null_dist=f"F({r_hat:.6g},{df2:.6g})",
        diagnostics={"r_hat": r_hat, "trace_s": tr},
    )


def bai_saranadasa(s: TwoSample) -> TestResult:
    """Trace-corrected Euclidean-norm test with a normal reference.

    statistic = [||d||^2 - (n+m)/(nm) tr S] / [(n+m)/(nm) *
    sqrt(2 (N-1)(N-2) / (N (N-3)) * (tr S^2 - tr^2 S / (N-2)))], N = n+m.
    """
    n, m = s.n, s.m
    big_n = n + m
    if big_n < 4:
        raise DimensionError("needs n + m >= 4")
    cov = pooled_covariance(s)
    tr = float(np.trace(cov))
    tr_sq = float(np.sum(cov * cov))
    adj = tr_sq - tr * tr / (big_n - 2)
    radicand = 2.0 * (big_n - 1) * (big_n - 2) / (big_n * (big_n - 3)) * adj
    if radicand <= 0:
        raise NumericalError(
            f"degenerate variance estimate (radicand {radicand:.3e})"
        )
    d = _mean_difference(s)
    scale = big_n / (n * m)
    numerator = float(d @ d) - scale * tr
    stat = numerator / (scale * np.sqrt(radicand))
    return TestResult(
        method="bai_saranadasa",
        statistic=stat,
        p_value=float(stats.norm.sf(stat)),
        null_dist="standard-normal",
        diagnostics={"numerator": numerator, "trace_s": tr},
    )


# ---------------------------------------------------------------------------
# leave-out U-statistics


def _tr_cov_sq_leave_out(x: np.ndarray) -> float:
    """(1/(n(n-1))) sum_{i != j} [X_i'(X_j - Xbar_(i,j))][X_j'(X_i - Xbar_(i,j))]."""
    n = x.shape[0]
    g = x @ x.T
    row = g.sum(axis=1)
    # X_i' Xbar_(i,j) = (row_i - G_ii - G_ij) / (n - 2)
    c = g - (row[:, None] - np.diag(g)[:, None] - g) / (n - 2)
    np.fill_diagonal(c, 0.0)
    return float(np.sum(c * c.T)) / (n * (n - 1))


def _tr_cov_cross_leave_out(x: np.ndarray, y: np.ndarray) -> float:
    """(1/(nm)) sum_{i,j} [X_i'(Y_j - Ybar_(j))][Y_j'(X_i - Xbar_(i))]."""
    n, m = x.shape[0], y.shape[0]
    a = x @ y.T  # (n, m)
    row = a.sum(axis=1)  # X_i' (m Ybar)
    col = a.sum(axis=0)  # Y_j' (n Xbar)
    left = a - (row[:, None] - a) / (m - 1)
    right = a - (col[None, :] - a) / (n - 1)
    return float(np.sum(left * right)) / (n * m)


def cq_trace_estimates(s: TwoSample, center: bool = False) -> TraceEstimates:
    """Leave-out U-statistic estimates of tr(S1^2), tr(S2^2), tr(S1 S2).

    The leave-out group means make the estimators exactly unbiased without
    requiring the two covariances to match.  Needs n, m >= 3 so that the
    leave-two-out means exist.

    ``center=True`` removes the pooled grand mean from all rows first.  The
    raw estimators are not translation invariant (the leading factors are
    uncentered); the centered variant is, at the cost of an O(1/(n+m))
    perturbation that leaves ratio consistency intact.
    """
    if s.n < 3 or s.m < 3:
        raise DimensionError("leave-out trace estimates need n >= 3 and m >= 3")
    x, y = s.x.values, s.y.values
    if center:
        grand = s.pooled_rows().mean(axis=0)
        x = x - grand
        y = y - grand
    return TraceEstimates(
        tr_s1_sq=_tr_cov_sq_leave_out(x),
        tr_s2_sq=_tr_cov_sq_leave_out(y),
        tr_s1_s2=_tr_cov_cross_leave_out(x, y),
    )


def chen_qin(s: TwoSample) -> TestResult:
    """Inner-product U-statistic mean test allowing unequal covariances.

    The functional T_n = mean of off-diagonal X_i'X_j + same for Y - 2 cross
    estimates ||mu1 - mu2||^2 exactly; it is standardized by leave-out trace
    estimates of the null variance, with a standard normal reference.

    All sums are evaluated after removing the pooled grand mean.  T_n is
    algebraically unchanged by any common shift, so this costs nothing there,
    and it makes the trace standardizers (hence the whole statistic) exactly
    translation invariant as well.
    """
    if s.n < 3 or s.m < 3:
        raise DimensionError("needs n >= 3 and m >= 3")
    n, m = s.n, s.m
    grand = s.pooled_rows().mean(axis=0)
    x = s.x.values - grand
    y = s.y.values - grand
    gx = x @ x.T
    gy = y @ y.T
    cross = x @ y.T
    t_n = (
        (gx.sum() - np.trace(gx)) / (n * (n - 1))
        + (gy.sum() - np.trace(gy)) / (m * (m - 1))
        - 2.0 * cross.sum() / (n * m)
    )
    traces = cq_trace_estimates(s, center=True)
    variance = (
        2.0 * traces.tr_s1_sq / (n * (n - 1))
        + 2.0 * traces.tr_s2_sq / (m * (m - 1))
        + 4.0 * traces.tr_s1_s2 / (n * m)
    )
    if variance <= 0:
        raise NumericalError(
            "non-positive variance estimate: "
            f"tr_s1_sq={traces.tr_s1_sq:.3e}, tr_s2_sq={traces.tr_s2_sq:.3e}, "
            f"tr_s1_s2={traces.tr_s1_s2:.3e}"
        )
    stat = float(t_n) / np.sqrt(variance)
    return TestResult(
        method="chen_qin",
        statistic=stat,
        p_value=float(stats.norm.sf(stat)),
        null_dist="standard-normal",
        diagnostics={
            "t_n_functional": float(t_n),
            "tr_s1_sq": traces.tr_s1_sq,
            "tr_s2_sq": traces.tr_s2_sq,
            "tr_s1_s2": traces.tr_s1_s2,
            "variance": float(variance),
        },
    )


def srivastava_du(s: TwoSample, drop_correction: bool = False) -> TestResult:
    """Diagonally standardized (scale-invariant) mean test.

    statistic = [tau d' D^-1 d - (n+m) p / (n+m-2)] /
    sqrt(2 (tr R^2 - p^2/(n+m-2)) c_{p,n}), where D is the diagonal of the
    n+m-divisor pooled covariance, R the pooled correlation matrix, and
    c_{p,n} = 1 + tr R^2 / p^{3/2} (dropped when ``drop_correction``).
    """
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    df = big_n - 2
    cov = pooled_covariance(s)
    diag = np.diag(cov)
    if np.any(diag <= 0):
        raise NumericalError("zero-variance column in pooled covariance")
    inv_sd = 1.0 / np.sqrt(diag)
    corr = cov * inv_sd[:, None] * inv_sd[None, :]
    tr_r_sq = float(np.sum(corr * corr))
    d = _mean_difference(s)
    diag_biased = diag * df / big_n
    quad = float(np.sum(d * d / diag_biased))
    numerator = _tau(n, m) * quad - big_n * p / df
    correction = 1.0 if drop_correction else 1.0 + tr_r_sq / p**1.5
    radicand = 2.0 * (tr_r_sq - p * p / df) * correction
    if radicand <= 0:
        raise NumericalError(
            f"degenerate variance estimate (tr R^2 = {tr_r_sq:.4g}, p^2/df = "
            f"{p * p / df:.4g})"
        )
    stat = numerator / np.sqrt(radicand)
    return TestResult(
        method="srivastava_du",
        statistic=stat,
        p_value=float(stats.norm.sf(stat)),
        null_dist="standard-normal",
        diagnostics={"tr_r_sq": tr_r_sq, "correction_factor": correction},
    )


def park_ayyala(s: TwoSample) -> TestResult:
    """Scale-invariant inner-product U-statistic test.

    Cross products are standardized by leave-out diagonal matrices (so each
    term is independent of the observations it involves), summed into the
    functional U_n, and standardized by leave-out correlation-trace
    estimates.  Needs n, m >= 5.

    As with :func:`chen_qin`, all rows are centered by the pooled grand mean
    first: the leave-out diagonals are shift invariant already, and centering
    the cross products makes the statistic exactly translation invariant (the
    induced perturbation is O(1/(n+m)) and cancels between the three terms).
    """
    n, m, p = s.n, s.m, s.p
    if n < 5 or m < 5:
        raise DimensionError("needs n >= 5 and m >= 5")
    big_n = n + m
    grand = s.pooled_rows().mean(axis=0)
    x = s.x.values - grand
    y = s.y.values - grand

    t1 = x.sum(axis=0)
    q1 = (x * x).sum(axis=0)
    t2 = y.sum(axis=0)
    q2 = (y * y).sum(axis=0)
    # unbiased group variances (diagonals)
    s1 = (q1 - t1 * t1 / n) / (n - 1)
    s2 = (q2 - t2 * t2 / m) / (m - 1)

    # within-group leave-two-out diagonals: (n-3) S1_(i,j) stored directly
    def _pair_ss(v: np.ndarray, t: np.ndarray, q: np.ndarray, cnt: int) -> np.ndarray:
        vi = v[:, None, :]
        vj = v[None, :, :]
        t_pair = t[None, None, :] - vi - vj
        q_pair = q[None, None, :] - vi * vi - vj * vj
        return q_pair - t_pair * t_pair / (cnt - 2)

    d1 = (_pair_ss(x, t1, q1, n) + (m - 1) * s2[None, None, :]) / (big_n - 4)
    d2 = ((n - 1) * s1[None, None, :] + _pair_ss(y, t2, q2, m)) / (big_n - 4)
    # cross leave-one-out diagonals are separable in (i, j)
    e1 = q1[None, :] - x * x - (t1[None, :] - x) ** 2 / (n - 1)  # (n-2) S1_(i)
    e2 = q2[None, :] - y * y - (t2[None, :] - y) ** 2 / (m - 1)  # (m-2) S2_(j)
    d12 = (e1[:, None, :] + e2[None, :, :]) / (big_n - 4)

    off1 = ~np.eye(n, dtype=bool)
    off2 = ~np.eye(m, dtype=bool)
    if (
        np.any(d1[off1] <= 0)
        or np.any(d2[off2] <= 0)
        or np.any(d12 <= 0)
    ):
        raise NumericalError("a leave-out diagonal entry is non-positive")
    # the i == j slices are never used; make them safely invertible
    d1[np.arange(n), np.arange(n), :] = 1.0
    d2[np.arange(m), np.arange(m), :] = 1.0

    inv_d1 = 1.0 / d1
    inv_d2 = 1.0 / d2
    inv_d12 = 1.0 / d12
    term1 = np.einsum("ik,ijk,jk->ij", x, inv_d1, x)
    term2 = np.einsum("ik,ijk,jk->ij", y, inv_d2, y)
    term3 = np.einsum("ik,ijk,jk->ij", x, inv_d12, y)
    factor = (big_n - 6) / (big_n - 4)
    u_n = factor * (
        term1[off1].sum() / (n * (n - 1))
        + term2[off2].sum() / (m * (m - 1))
        - 2.0 * term3.sum() / (n * m)
    )

    # leave-out correlation-trace estimates
    xbar_pair = (t1[None, None, :] - x[:, None, :] - x[None, :, :]) / (n - 2)
    a = np.einsum("ik,ijk,ijk->ij", x, inv_d1, x[None, :, :] - xbar_pair)
    tr_r1 = float(np.sum((a * a.T)[off1])) / (n * (n - 1))
    ybar_pair = (t2[None, None, :] - y[:, None, :] - y[None, :, :]) / (m - 2)
    b = np.einsum("ik,ijk,ijk->ij", y, inv_d2, y[None, :, :] - ybar_pair)
    tr_r2 = float(np.sum((b * b.T)[off2])) / (m * (m - 1))
    y_dev = y - (t2[None, :] - y) / (m - 1)  # Y_j - Ybar_(j)
    x_dev = x - (t1[None, :] - x) / (n - 1)  # X_i - Xbar_(i)
    u = np.einsum("ik,ijk,jk->ij", x, inv_d12, y_dev)
    v = np.einsum("jk,ijk,ik->ij", y, inv_d12, x_dev)
    tr_r12 = float(np.sum(u * v)) / (n * m)

    variance = factor**2 * (
        2.0 * tr_r1 / (n * (n - 1))
        + 2.0 * tr_r2 / (m * (m - 1))
        + 4.0 * tr_r12 / (n * m)
    )
    if variance <= 0:
        raise NumericalError(
            "non-positive variance estimate: "
            f"tr_r1={tr_r1:.3e}, tr_r2={tr_r2:.3e}, tr_r12={tr_r12:.3e}"
        )
    stat = float(u_n) / np.sqrt(variance)
    return TestResult(
        method="park_ayyala",
        statistic=stat,
        p_value=float(stats.norm.sf(stat)),
        null_dist="standard-normal",
        diagnostics={
            "u_n_functional": float(u_n),
            "tr_r1_sq": tr_r1,
            "tr_r2_sq": tr_r2,
            "tr_r1_r2": tr_r12,
            "variance": float(variance),
        },
    )


# ---------------------------------------------------------------------------
# per-column aggregate and max tests


def _column_stats(values: np.ndarray, mask: Optional[np.ndarray]):
    """Observed count, mean, and centered SS per column under a mask."""
    if mask is None:
        n = values.shape[0]
        counts = np.full(values.shape[1], n, dtype=float)
        means = values.mean(axis=0)
        ss = ((values - means) ** 2).sum(axis=0)
        return counts, means, ss
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise DimensionError("missing mask shape must match the data shape")
    counts = mask.sum(axis=0).astype(float)
    if np.any(counts < 2):
        raise DimensionError("each column needs at least 2 observed values per group")
    sums = np.where(mask, values, 0.0).sum(axis=0)
    means = sums / counts
    ss = (np.where(mask, values - means[None, :], 0.0) ** 2).sum(axis=0)
    return counts, means, ss


def pct(
    s: TwoSample,
    missing_mask: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> TestResult:
    """Average of squared per-column t statistics, tolerating missing data.

    ``missing_mask`` is an optional pair of boolean matrices (True = observed)
    matching the two groups.  Each column uses its own observed counts
    (n_k, m_k); the statistic is the average over columns of
    (n_k m_k / (n_k + m_k)) (Xbar_k - Ybar_k)^2 / S_k with S_k the pooled
    variance from the observed values.

    The null is a scaled chi-square c * chi2_d, with (c, d) matched to the
    theoretical null moments of the squared t statistics (t_k^2 ~ F(1, d_k),
    d_k = n_k + m_k - 2, treated as independent across columns).  Every
    column must have d_k >= 5 so those moments are finite.
    """
    xm, ym = (None, None) if missing_mask is None else missing_mask
    nx, mean_x, ss_x = _column_stats(s.x.values, xm)
    ny, mean_y, ss_y = _column_stats(s.y.values, ym)
    d_k = nx + ny - 2.0
    if np.any(d_k < 5):
        raise NumericalError(
            "a column has fewer than 7 observed values in total; the "
            "scaled-chi-square null needs n_k + m_k - 2 >= 5"
        )
    pooled_var = (ss_x + ss_y) / d_k
    if np.any(pooled_var <= 0):
        raise NumericalError("zero-variance column")
    tau_k = nx * ny / (nx + ny)
    t_sq = tau_k * (mean_x - mean_y) ** 2 / pooled_var
    p = s.p
    statistic = float(t_sq.mean())
    mean_null = float(np.mean(d_k / (d_k - 2.0)))
    var_null = float(
        np.sum(2.0 * d_k**2 * (d_k - 1.0) / ((d_k - 2.0) ** 2 * (d_k - 4.0)))
    ) / p**2
    c = var_null / (2.0 * mean_null)
    dof = 2.0 * mean_null**2 / var_null
    pval = float(stats.chi2.sf(statistic / c, dof))
    return TestResult(
        method="pct",
        statistic=statistic,
        p_value=pval,
        null_dist=f"scaled-chi-square({c:.6g},{dof:.6g})",
        diagnostics={"scale": c, "dof": dof, "min_df": float(d_k.min())},
    )


def gct_aggregate(s: TwoSample) -> float:
    """Uncorrected average of squared Welch t statistics.

    Returns the raw functional p^-1 sum_k (Xbar_k - Ybar_k)^2 /
    (s2_Xk/n + s2_Yk/m); the higher-order centering corrections needed to
    calibrate it are out of scope, so no TestResult is produced.
    """
    x, y = s.x.values, s.y.values
    n, m = s.n, s.m
    var_x = x.var(axis=0, ddof=1)
    var_y = y.var(axis=0, ddof=1)
    denom = var_x / n + var_y / m
    if np.any(denom <= 0):
        raise NumericalError("zero-variance column")
    diff = x.mean(axis=0) - y.mean(axis=0)
    return float(np.mean(diff * diff / denom))


def clx_max_test(
    s: TwoSample,
    omega: Union[str, np.ndarray] = "diagonal-inverse",
    alpha: float = 0.05,
) -> TestResult:
    """Maximum standardized coordinate difference after a precision transform.

    ``omega`` chooses the precision-matrix estimate applied to the data:
    "identity", "diagonal-inverse" (reciprocal diagonal of the pooled
    covariance — the default stand-in for a sparse-precision estimate), or an
    explicit p x p matrix.  The statistic is calibrated against the type-I
    extreme-value law; diagnostics report the alpha-level threshold
    2 log p - log log p - log pi - 2 log log(1/(1-alpha)) and the resulting
    decision.
    """
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    if isinstance(omega, str):
        if omega == "identity":
            omega_mat = None
        elif omega == "diagonal-inverse":
            diag = np.diag(pooled_covariance(s))
            if np.any(diag <= 0):
                raise NumericalError("zero-variance column in pooled covariance")
            omega_mat = np.diag(1.0 / diag)
        else:
            raise ValueError(
                f"unknown omega choice {omega!r}; use 'identity', "
                "'diagonal-inverse', or a matrix"
            )
    else:
        omega_mat = np.asarray(omega, dtype=float)
        if omega_mat.shape != (p, p):
            raise DimensionError(
                f"omega must be {p} x {p}, got {omega_mat.shape}"
            )
    x, y = s.x.values, s.y.values
    if omega_mat is not None:
        x = x @ omega_mat.T
        y = y @ omega_mat.T
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    var_x = (xc * xc).sum(axis=0) / n  # n-divisor covariance diagonals
    var_y = (yc * yc).sum(axis=0) / m
    denom = (n * var_x + m * var_y) / big_n
    if np.any(denom <= 0):
        raise NumericalError("zero-variance coordinate after transform")
    diff = x.mean(axis=0) - y.mean(axis=0)
    scaled = diff * diff / denom
    stat = _tau(n, m) * float(scaled.max())
    argmax = int(np.argmax(scaled))
    if p == 1:
        # the extreme-value calibration is meaningless with one coordinate;
        # fall back to the exact scalar tail (stat ~ chi-square_1 at scale)
        pval = float(stats.chi2.sf(stat, 1))
        threshold = float(stats.chi2.isf(alpha, 1))
        null_dist = "chi-square(1)"
    else:
        centered = stat - 2.0 * np.log(p) + np.log(np.log(p))
        pval = float(1.0 - np.exp(-np.exp(-centered / 2.0) / np.sqrt(np.pi)))
        threshold = float(
            2.0 * np.log(p)
            - np.log(np.log(p))
            - np.log(np.pi)
            - 2.0 * np.log(np.log(1.0 / (1.0 - alpha)))
        )
        null_dist = "extreme-value-I"
    return TestResult(
        method="clx_max_test",
        statistic=stat,
        p_value=pval,
        null_dist=null_dist,
        diagnostics={
            "threshold": threshold,
            "reject": float(stat > threshold),
            "argmax_coordinate": float(argmax),
        },
    )


def zoh_bayes_factor(s: TwoSample, tau0: float, alpha: float = 0.05) -> TestResult:
    """Closed-form Bayes factor for the mean difference, with a decision rule.

    BF10 = (1+eta)^{-p/2} [(1 + p T^2/((1+eta)(N-p-1))) /
    (1 + p T^2/(N-p-1))]^{-(N-1)/2} with eta = nm/((n+m) tau0) and T^2 the
    F-scaled Hotelling statistic.  The statistic field carries T^2 and the
    p_value its F reference; the Bayes factor, its log, the rejection
    threshold, and the decision are in diagnostics.
    """
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    hot = hotelling_t2(s)
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    df2 = big_n - p - 1
    eta = n * m / (big_n * tau0)
    t2 = hot.statistic
    log_bf = -0.5 * p * np.log1p(eta) - 0.5 * (big_n - 1) * (
        np.log1p(p * t2 / ((1.0 + eta) * df2)) - np.log1p(p * t2 / df2)
    )
    f_alpha = float(stats.f.isf(alpha, p, df2))
    c_n = p * f_alpha / (p * f_alpha + df2)
    tau_alpha = n * m / (big_n * f_alpha - 1.0)
    tau_star = n * m / (big_n * tau_alpha)
    threshold = tau_star ** (-0.5 * p) * (1.0 - (tau_star - 1.0) / tau_star * c_n)
    bf = float(np.exp(log_bf))
    return TestResult(
        method="zoh_bayes_factor",
        statistic=t2,
        p_value=hot.p_value,
        null_dist=hot.null_dist,
        diagnostics={
            "bf10": bf,
            "log_bf10": float(log_bf),
            "eta": float(eta),
            "threshold": float(threshold),
            "reject": float(bf > threshold),
        },
    )


# ---------------------------------------------------------------------------
# descriptive assumption diagnostics


def condition_ratios(matrix: np.ndarray) -> dict[str, float]:
    """Spectral ratios used by the asymptotic-regime conditions.

    For a symmetric PSD matrix M, reports lambda_max/sqrt(tr M^2),
    tr(M^4)/tr^2(M^2), and tr(M^4)/p.  Descriptive only.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("expected a square matrix")
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    tr2 = float(np.sum(eigs**2))
    tr4 = float(np.sum(eigs**4))
    p = m.shape[0]
    return {
        "lambda_max_over_sqrt_tr2": float(eigs.max() / np.sqrt(tr2)) if tr2 > 0 else np.nan,
        "tr4_over_tr2_squared": tr4 / tr2**2 if tr2 > 0 else np.nan,
        "tr4_over_p": tr4 / p,
    }


def assumption_diagnostics(s: TwoSample) -> dict[str, float]:
    """Descriptive ratios describing how the sample sits in the asymptotic regime.

    No pass/fail: reports spectral concentration of the pooled covariance and
    correlation matrices plus the dimension-to-sample ratios.
    """
    cov = pooled_covariance(s)
    cov_ratios = condition_ratios(cov)
    diag = np.diag(cov)
    out = {
        "lambda_max_over_sqrt_tr_s2": cov_ratios["lambda_max_over_sqrt_tr2"],
        "tr_s4_over_tr2_s2": cov_ratios["tr4_over_tr2_squared"],
    }
    if np.all(diag > 0):
        inv_sd = 1.0 / np.sqrt(diag)
        corr = cov * inv_sd[:, None] * inv_sd[None, :]
        corr_ratios = condition_ratios(corr)
        out["tr_r4_over_tr2_r2"] = corr_ratios["tr4_over_tr2_squared"]
        out["tr_r4_over_p"] = corr_ratios["tr4_over_p"]
    else:
        out["tr_r4_over_tr2_r2"] = float("nan")
        out["tr_r4_over_p"] = float("nan")
    out["p_over_n"] = s.p / s.n
    out["x_fraction"] = s.n / (s.n + s.m)
    return out
