"""Mean testing for M-dependent stationary sequences.

Rows of a data matrix are consecutive observations of a second-order
stationary process whose autocovariance vanishes beyond lag M.  Biased
autocovariance-trace estimates are debiased through the exact linear map
between their expectations and the true traces, feeding an unbiased
squared-mean-difference functional and its studentized test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .core import (
    DataMatrix,
    DimensionError,
    NumericalError,
    RngLike,
    TestResult,
    TwoSample,
    as_generator,
)

__all__ = [
    "AutocovTraceSet",
    "StationaryProcessSpec",
    "autocov_biased",
    "theta_coefficient",
    "debiased_traces",
    "m_n_functional",
    "apr_test",
    "generate_ma_process",
]

ArrayLike = Union[DataMatrix, np.ndarray]


def _rows(m: ArrayLike) -> np.ndarray:
    if isinstance(m, DataMatrix):
        return m.values
    values = np.asarray(m, dtype=float)
    if values.ndim != 2:
        raise DimensionError("data must be a 2-d array of rows")
    return values


@dataclass(frozen=True)
class AutocovTraceSet:
    """Raw and debiased autocovariance-trace estimates for lags 0..lag_cap."""

    raw_traces: np.ndarray
    debiased_traces: np.ndarray
    lag_cap: int

    def __post_init__(self) -> None:
        raw = np.asarray(self.raw_traces, dtype=float)
        deb = np.asarray(self.debiased_traces, dtype=float)
        if raw.shape != (self.lag_cap + 1,) or deb.shape != (self.lag_cap + 1,):
            raise DimensionError("trace vectors must have length lag_cap + 1")
        object.__setattr__(self, "raw_traces", raw)
        object.__setattr__(self, "debiased_traces", deb)


@dataclass(frozen=True)
class StationaryProcessSpec:
    """Gaussian moving-average process X_i = mu + sum_j A_j eps_{i-j}.

    ``ma_coefficients`` is the list (A_0, ..., A_M) of p x p matrices; the
    implied autocovariance is Sigma(a) = sum_j A_j A_{j+a}', zero beyond M.
    """

    mu: np.ndarray
    ma_coefficients: Sequence[np.ndarray]
    innovation: str = "normal"

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1:
            raise DimensionError("mu must be a vector")
        coeffs = tuple(np.asarray(a, dtype=float) for a in self.ma_coefficients)
        if not coeffs:
            raise DimensionError("need at least A_0 (order M >= 0)")
        p = mu.shape[0]
        for j, a in enumerate(coeffs):
            if a.shape != (p, p):
                raise DimensionError(
                    f"coefficient {j} has shape {a.shape}, expected ({p}, {p})"
                )
        if self.innovation != "normal":
            raise ValueError("only normal innovations are supported")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "ma_coefficients", coeffs)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def order(self) -> int:
        return len(self.ma_coefficients) - 1

    def implied_autocovariance(self, a: int) -> np.ndarray:
        """Sigma(a) = Cov(X_i, X_{i+a}) = sum_j A_j A_{j+a}' (zero beyond the order)."""
        if a < 0:
            raise DimensionError("lag must be non-negative")
        coeffs = self.ma_coefficients
        out = np.zeros((self.p, self.p))
        for j in range(len(coeffs) - a):
            out += coeffs[j] @ coeffs[j + a].T
        return out


def autocov_biased(m: ArrayLike, a: int) -> np.ndarray:
    """Lag-a autocovariance with divisor n: n^-1 sum (X_i - Xbar)(X_{i+a} - Xbar)'."""
    values = _rows(m)
    n = values.shape[0]
    if not 0 <= a < n:
        raise DimensionError(f"lag must satisfy 0 <= a < n = {n}, got {a}")
    centered = values - values.mean(axis=0)
    return centered[: n - a].T @ centered[a:] / n


def theta_coefficient(n: int, a: int, b: int) -> float:
    """Coefficient of tr Sigma(b) in E[tr Sigma_hat(a)], lags 0-based.

    E[tr Sigma_hat(a)] = sum_b theta_n(a, b) tr Sigma(b): the biased lag-a
    trace mixes every true lag through the centering at the sample mean.
    Exact for second-order stationary data; the counting terms are

        theta_n(a,b) = (n-a)/n 1(a=b) - 2 c1(a,b)/n^2 + (n-a) c2(b)/n^3,

    with c1 = #{(t,s): 1<=t<=n-a, 1<=s<=n, |t-s|=b} and
    c2 = #{(u,v) in [1,n]^2 : |u-v|=b}.
    """
    if n < 1:
        raise DimensionError("n must be positive")
    if not (0 <= a < n and 0 <= b < n):
        raise DimensionError(f"lags must satisfy 0 <= a, b < n = {n}")
    lead = (n - a) / n if a == b else 0.0
    if b == 0:
        c1 = n - a
        c2 = n
    else:
        c1 = min(n - a, n - b) + max(0, n - a - b)
        c2 = 2 * (n - b)
    return lead - 2.0 * c1 / n**2 + (n - a) * c2 / n**3


def _theta_matrix(n: int, lag_cap: int) -> np.ndarray:
    return np.array(
        [[theta_coefficient(n, a, b) for b in range(lag_cap + 1)]
         for a in range(lag_cap + 1)]
    )


def debiased_traces(m: ArrayLike, lag_cap: int) -> AutocovTraceSet:
    """Raw autocovariance traces for lags 0..lag_cap and their debiased version.

    Solves the truncated expectation map: the truncation is exact when the
    process is M-dependent with M <= lag_cap, since higher true traces are
    zero and contribute nothing to the omitted columns.
    """
    values = _rows(m)
    n = values.shape[0]
    if not 0 <= lag_cap < n:
        raise DimensionError(f"lag_cap must satisfy 0 <= L < n = {n}")
    centered = values - values.mean(axis=0)
    raw = np.array(
        [float(np.sum(centered[: n - a] * centered[a:])) / n
         for a in range(lag_cap + 1)]
    )
    theta = _theta_matrix(n, lag_cap)
    condition = np.linalg.cond(theta)
    if not np.isfinite(condition) or condition > 1e8:
        raise NumericalError(
            f"trace debiasing map is ill-conditioned (cond={condition:.3g})"
        )
    return AutocovTraceSet(
        raw_traces=raw,
        debiased_traces=np.linalg.solve(theta, raw),
        lag_cap=lag_cap,
    )


def _mean_correction(values: np.ndarray, big_m: int) -> tuple[float, AutocovTraceSet]:
    """(1/n) sum_{|a| <= L} (1 - |a|/n) gamma*(|a|) and the trace set behind it."""
    n = values.shape[0]
    cap = min(big_m, n - 1)
    traces = debiased_traces(values, cap)
    gamma = traces.debiased_traces
    correction = gamma[0]
    for a in range(1, cap + 1):
        correction += 2.0 * (1.0 - a / n) * gamma[a]
    return correction / n, traces


def m_n_functional(s: TwoSample, big_m: int) -> float:
    """Unbiased functional for ||mu_1 - mu_2||^2 under M-dependence.

    ||Xbar - Ybar||^2 minus per-group debiased autocovariance corrections
    with (1 - |a|/n) weights over lags |a| <= min(M, group size - 1).
    """
    if big_m < 0:
        raise DimensionError("M must be non-negative")
    if big_m >= min(s.n, s.m):
        raise DimensionError(f"needs M < min(n, m) = {min(s.n, s.m)}")
    d = s.x.values.mean(axis=0) - s.y.values.mean(axis=0)
    corr_x, _ = _mean_correction(s.x.values, big_m)
    corr_y, _ = _mean_correction(s.y.values, big_m)
    return float(d @ d - corr_x - corr_y)


def _mixing_coefficient(n: int, a: int, g: int) -> float:
    """Coefficient of Sigma(g) (signed lag) in E[Sigma_hat(a)], exact counts.

    Same counting argument as ``theta_coefficient`` but kept at matrix level
    with orientation: E Sigma_hat(a) = sum_g K(a,g) Sigma(g), Sigma(-b) =
    Sigma(b)'.  Requires only second-order stationarity.
    """
    count_direct = max(0, min(n - a, n - g) - max(1, 1 - g) + 1)
    count_reflect = max(0, min(n - a, n - a + g) - max(1, 1 - a + g) + 1)
    lead = (n - a) / n if g == a else 0.0
    return lead - (count_direct + count_reflect) / n**2 + (n - a) * (n - abs(g)) / n**3


def _omega_estimate(rows: np.ndarray, cap: int, n_group: int) -> np.ndarray:
    """Exactly unbiased estimate of Omega = sum_{|a|<=cap} (1-|a|/n_group) Sigma(a).

    Solves the symmetric part of the exact expectation map E Sigma_hat(a) =
    sum_g K(a,g) Sigma(g) for the symmetrized lag matrices P_b =
    Sigma(b) + Sigma(b)' (P_0 = 2 Sigma(0)), then combines them with the
    group-level (1 - b/n_group) weights.  Omega only involves the P_b.
    """
    n_rows = rows.shape[0]
    if cap >= n_rows:
        raise DimensionError("lag cap must be below the number of rows")
    hats = [autocov_biased(rows, a) for a in range(cap + 1)]
    mix = np.empty((cap + 1, cap + 1))
    for a in range(cap + 1):
        mix[a, 0] = _mixing_coefficient(n_rows, a, 0)
        for b in range(1, cap + 1):
            mix[a, b] = _mixing_coefficient(n_rows, a, b) + _mixing_coefficient(
                n_rows, a, -b
            )
    rhs = np.stack([(h + h.T).ravel() for h in hats])
    p_parts = np.linalg.solve(mix, rhs)
    p = rows.shape[1]
    omega = 0.5 * p_parts[0].reshape(p, p)
    for b in range(1, cap + 1):
        omega += (1.0 - b / n_group) * p_parts[b].reshape(p, p)
    return omega


def _tr_omega_sq_split(values: np.ndarray, cap: int) -> float:
    """tr(Omega^2) via a split-half cross product.

    The two halves are separated by a gap of ``cap`` rows so they are
    independent under M-dependence; the cross product of the two estimates
    then carries none of the quadratic trace-product bias that a squared
    single estimate would.
    """
    n = values.shape[0]
    half = (n - cap) // 2
    first = values[:half]
    second = values[half + cap:]
    if min(first.shape[0], second.shape[0]) <= cap + 1:
        raise DimensionError("too few rows to split for variance estimation")
    omega_a = _omega_estimate(first, cap, n)
    omega_b = _omega_estimate(second, cap, n)
    return float(np.sum(omega_a * omega_b))


def apr_test(s: TwoSample, big_m: int) -> TestResult:
    """Studentized M-dependent mean test with a standard normal null.

    The statistic divides the unbiased functional by a plug-in estimate of
    its null standard deviation, 2[T1/n^2 + T2/m^2 + 2 T12/(nm)] with
    Tg estimating tr(Omega_g^2) for the lag-windowed autocovariance sums
    Omega_g.  Tg is a cross product over two within-group halves separated
    by an M-row gap, and T12 a cross product over the two groups, so every
    factor pair is independent and the quadratic trace bias never enters.
    """
    n, m = s.n, s.m
    if big_m < 0:
        raise DimensionError("M must be non-negative")
    if big_m >= min(n, m) / 4:
        raise DimensionError(
            f"needs M < min(n, m)/4 = {min(n, m) / 4:.1f} for stable estimates"
        )
    d = s.x.values.mean(axis=0) - s.y.values.mean(axis=0)
    corr_x, traces_x = _mean_correction(s.x.values, big_m)
    corr_y, traces_y = _mean_correction(s.y.values, big_m)
    m_n = float(d @ d - corr_x - corr_y)

    cap_x = min(big_m, n - 1)
    cap_y = min(big_m, m - 1)
    t1 = _tr_omega_sq_split(s.x.values, cap_x)
    t2 = _tr_omega_sq_split(s.y.values, cap_y)
    t12 = float(np.sum(
        _omega_estimate(s.x.values, cap_x, n)
        * _omega_estimate(s.y.values, cap_y, m)
    ))
    variance = 2.0 * (t1 / n**2 + t2 / m**2 + 2.0 * t12 / (n * m))
    if not np.isfinite(variance) or variance <= 0:
        raise NumericalError(f"variance estimate is not positive ({variance:.3g})")

    statistic = m_n / np.sqrt(variance)
    diagnostics = {
        "m_n": m_n,
        "variance": variance,
        "tr_omega1_sq": t1,
        "tr_omega2_sq": t2,
        "tr_omega1_omega2": t12,
    }
    for a, value in enumerate(traces_x.debiased_traces):
        diagnostics[f"debiased_trace1_lag{a}"] = float(value)
    for a, value in enumerate(traces_y.debiased_traces):
        diagnostics[f"debiased_trace2_lag{a}"] = float(value)
    return TestResult(
        method="apr",
        statistic=float(statistic),
        p_value=float(stats.norm.sf(statistic)),
        null_dist="standard-normal",
        diagnostics=diagnostics,
    )


def generate_ma_process(
    spec: StationaryProcessSpec, n: int, rng: RngLike = None
) -> DataMatrix:
    """Sample n consecutive observations of the moving-average process."""
    big_m = spec.order
    if n <= big_m:
        raise DimensionError(f"need n > M = {big_m}")
    gen = as_generator(rng)
    p = spec.p
    eps = gen.standard_normal((n + big_m, p))
    out = np.tile(spec.mu, (n, 1))
    for j, coeff in enumerate(spec.ma_coefficients):
        out += eps[big_m - j : big_m - j + n] @ coeff.T
    return DataMatrix(out)
