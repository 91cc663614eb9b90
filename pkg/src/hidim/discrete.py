"""Multivariate count models: multinomial testing, compound-multinomial
estimation, and correlated-count constructions.

The multinomial half provides exact CDF evaluation through the conditional
Poisson representation, the classical chi-square tests, and their
sparse-data replacements (count-difference functionals with permutation
cutoffs and a normalized proportion-difference statistic).  The compound
half covers the Dirichlet-multinomial model end to end: log mass, closed
form moments and precision, and a Newton-Raphson fitter whose Hessian is
diagonal plus rank-one and therefore invertible in linear time.  The tail
of the module holds small evaluators and samplers for dependent binary and
Poisson vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp, polygamma, psi, xlogy

from .core import (
    DataMatrix,
    DimensionError,
    NumericalError,
    RngLike,
    TestResult,
    as_generator,
)

__all__ = [
    "CountVector",
    "MultinomialParams",
    "DirMultParams",
    "DirMultFit",
    "MvBernoulliParams",
    "BivariatePoissonParams",
    "multinomial_mle",
    "multinomial_logpmf",
    "levin_cdf",
    "multinomial_two_sample",
    "dirmult_logpmf",
    "dirmult_moments",
    "dirmult_fit",
    "mvbernoulli_logpmf",
    "mvbernoulli_marginal",
    "bivpois_logpmf",
    "mvpois_sample_latent",
    "bivpois_sample_norta",
    "mvpois_sample_compound",
]


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class CountVector:
    """A vector of nonnegative integer category counts."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("counts must be a non-empty vector")
        if not np.issubdtype(arr.dtype, np.integer):
            rounded = np.rint(arr)
            if not np.all(np.isfinite(arr)) or np.any(np.abs(arr - rounded) > 0):
                raise DimensionError("counts must be integers")
            arr = rounded
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise DimensionError("counts must be nonnegative")
        object.__setattr__(self, "counts", arr)

    @property
    def p(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MultinomialParams:
    """Category probabilities summing to one."""

    pi: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pi, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("pi must be a non-empty vector")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DimensionError("pi entries must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise DimensionError(f"pi must sum to 1, got {arr.sum()!r}")
        object.__setattr__(self, "pi", arr)

    @property
    def p(self) -> int:
        return int(self.pi.size)


@dataclass(frozen=True)
class DirMultParams:
    """Dirichlet-multinomial concentration vector.

    ``theta0`` caches the total concentration; when provided it must agree
    with ``sum(theta)``.
    """

    theta: np.ndarray
    theta0: Optional[float] = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.theta, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError("theta must be a non-empty vector")
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise DimensionError("theta entries must be positive")
        total = float(arr.sum())
        if self.theta0 is not None:
            if abs(float(self.theta0) - total) > 1e-12 * max(1.0, total):
                raise DimensionError(
                    f"theta0 = {self.theta0!r} inconsistent with sum(theta) = {total!r}"
                )
        object.__setattr__(self, "theta", arr)
        object.__setattr__(self, "theta0", total)

    @property
    def p(self) -> int:
        return int(self.theta.size)


@dataclass(frozen=True)
class MvBernoulliParams:
    """Joint probability table over binary vectors.

    ``table`` has length 2^p in lexicographic bit order with the first
    component as the most significant bit: entry ``i`` is the probability
    of the configuration whose bits spell ``i`` in binary.
    """

    table: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.table, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DimensionError("table must be a vector of length 2^p, p >= 1")
        p = int(round(math.log2(arr.size)))
        if 2**p != arr.size:
            raise DimensionError(f"table length {arr.size} is not a power of 2")
        if p > 20:
            raise DimensionError(f"p = {p} exceeds the 2^p table guard (p <= 20)")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DimensionError("table entries must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise DimensionError(f"table must sum to 1, got {arr.sum()!r}")
        object.__setattr__(self, "table", arr)

    @property
    def p(self) -> int:
        return int(round(math.log2(self.table.size)))


@dataclass(frozen=True)
class BivariatePoissonParams:
    """Rates of the two own components and the shared component."""

    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise DimensionError(f"{name} must be nonnegative")
            object.__setattr__(self, name, value)


CountLike = Union[CountVector, Sequence[int], np.ndarray]


def _counts(x: CountLike) -> CountVector:
    return x if isinstance(x, CountVector) else CountVector(np.asarray(x))


# ---------------------------------------------------------------------------
# multinomial mass, CDF, maximum likelihood


def multinomial_mle(x: CountLike) -> MultinomialParams:
    """Maximum likelihood probabilities: counts divided by the total."""
    vec = _counts(x)
    if vec.total < 1:
        raise DimensionError("needs at least one observed draw")
    return MultinomialParams(vec.counts / vec.total)


def multinomial_logpmf(x: CountLike, params: MultinomialParams) -> float:
    """Log mass of a count vector; ``-inf`` off the support."""
    vec = _counts(x)
    if vec.p != params.p:
        raise DimensionError("counts and pi must have the same length")
    counts = vec.counts.astype(float)
    value = (
        gammaln(vec.total + 1.0)
        - float(gammaln(counts + 1.0).sum())
        + float(xlogy(counts, params.pi).sum())
    )
    return float(value)


def levin_cdf(
    a: Sequence[int],
    n_total: int,
    params: MultinomialParams,
    s: Optional[float] = None,
) -> float:
    """Rectangular multinomial CDF P(X_1 <= a_1, ..., X_p <= a_p).

    Uses the conditional-Poisson identity: with Y_k ~ Pois(s pi_k)
    independent, the CDF equals N!/(s^N e^-s) times the probability that
    the Y_k respect the bounds and total N.  That probability is one
    coefficient of the convolution of the truncated Poisson mass vectors,
    accumulated here in linear space with a running log offset so the
    scaling factor s (default N) only affects roundoff.

    Parameters
    ----------
    a : sequence of int
        Per-category upper bounds, all >= 0.
    n_total : int
        The multinomial total N.
    params : MultinomialParams
        Category probabilities.
    s : float, optional
        Poisson scale; any positive value gives the same CDF.

    Returns
    -------
    float in [0, 1].
    """
    bounds = np.asarray(a)
    if bounds.ndim != 1 or bounds.size != params.p:
        raise DimensionError("bounds must match the probability vector length")
    if np.any(bounds < 0):
        raise DimensionError("bounds must be nonnegative")
    n_total = int(n_total)
    if n_total < 0:
        raise DimensionError("total must be nonnegative")
    if n_total == 0:
        return 1.0
    if s is None:
        s = float(n_total)
    s = float(s)
    if not np.isfinite(s) or s <= 0:
        raise DimensionError("s must be positive")

    caps = np.minimum(bounds, n_total).astype(np.int64)
    # convolution of the unnormalized truncated Poisson mass vectors,
    # renormalized after every factor to dodge under/overflow
    acc = np.ones(1)
    log_offset = 0.0
    for k in range(params.p):
        rate = s * params.pi[k]
        i = np.arange(caps[k] + 1, dtype=float)
        log_w = xlogy(i, rate) - gammaln(i + 1.0) - rate
        shift = float(log_w.max())
        acc = np.convolve(acc, np.exp(log_w - shift))[: n_total + 1]
        log_offset += shift
        peak = float(acc.max())
        if peak == 0.0 or not np.isfinite(peak):
            if peak == 0.0:
                return 0.0
            raise NumericalError("convolution overflowed")
        acc /= peak
        log_offset += math.log(peak)

    if acc.size <= n_total or acc[n_total] <= 0.0:
        return 0.0
    log_cdf = (
        gammaln(n_total + 1.0)
        - n_total * math.log(s)
        + s
        + math.log(float(acc[n_total]))
        + log_offset
    )
    if not np.isfinite(log_cdf):
        raise NumericalError("CDF evaluation overflowed")
    if log_cdf > 1e-6:
        raise NumericalError(f"CDF exceeded 1 by {math.expm1(log_cdf):.3e}")
    return min(float(math.exp(log_cdf)), 1.0)


# ---------------------------------------------------------------------------
# two-sample multinomial tests

_TWO_SAMPLE_METHODS = ("pearson", "lrt", "chan1", "chan2", "pp")
_PERM_CHUNK = 256


def _chan1(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # categories with x + y = 0 have a zero numerator, so the guarded
    # divisor drops them without masking (keeps batched shapes intact)
    total = x + y
    terms = ((x - y) ** 2 - total) / np.maximum(total, 1)
    return np.sum(terms, axis=-1)


def _chan2(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x - y
    return np.sum(diff**2 - x - y, axis=-1)


def _permutation_pvalue(
    x: np.ndarray,
    y: np.ndarray,
    observed: float,
    statistic,
    permutations: int,
    rng: RngLike,
) -> float:
    """One-sided permutation p-value by relabeling the pooled draws."""
    gen = as_generator(rng)
    n, m = int(x.sum()), int(y.sum())
    p = x.size
    pooled_labels = np.repeat(np.arange(p), x + y)
    totals = (x + y).astype(np.int64)
    exceed = 0
    done = 0
    while done < permutations:
        batch = min(_PERM_CHUNK, permutations - done)
        order = np.argsort(gen.random((batch, n + m)), axis=1)
        first = pooled_labels[order[:, :n]]
        flat = first + p * np.arange(batch)[:, None]
        perm_x = np.bincount(flat.ravel(), minlength=batch * p).reshape(batch, p)
        perm_y = totals[None, :] - perm_x
        exceed += int(np.sum(statistic(perm_x, perm_y) >= observed))
        done += batch
    return (1.0 + exceed) / (permutations + 1.0)


def multinomial_two_sample(
    x: CountLike,
    y: CountLike,
    method: str = "pearson",
    permutations: int = 999,
    rng: RngLike = None,
    df: Optional[int] = None,
) -> TestResult:
    """Test whether two count vectors share a probability vector.

    ``pearson`` and ``lrt`` are the classical chi-square tests on pooled
    expectations; categories unobserved in both samples are dropped and the
    default degrees of freedom are the retained count minus one (``df``
    overrides).  ``chan1`` and ``chan2`` are count-difference functionals
    calibrated by label permutation of the pooled draws.  ``pp`` is the
    normalized proportion-difference statistic with a standard normal null,
    designed for the sparse regime p > n + m; its diagnostics report the
    concentration and size-balance ratios that its asymptotics need.
    """
    xv, yv = _counts(x), _counts(y)
    if xv.p != yv.p:
        raise DimensionError("count vectors must have the same length")
    n, m = xv.total, yv.total
    if n < 1 or m < 1:
        raise DimensionError("both samples need at least one draw")
    if method not in _TWO_SAMPLE_METHODS:
        raise DimensionError(f"method must be one of {_TWO_SAMPLE_METHODS}")

    xa = xv.counts.astype(float)
    ya = yv.counts.astype(float)
    keep = (xa + ya) > 0
    retained = int(keep.sum())

    if method in ("pearson", "lrt"):
        if retained < 2:
            raise DimensionError("needs at least two categories with observations")
        use_df = int(df) if df is not None else retained - 1
        if use_df < 1:
            raise DimensionError("degrees of freedom must be at least 1")
        pi_hat = (xa[keep] + ya[keep]) / (n + m)
        x_hat = n * pi_hat
        y_hat = m * pi_hat
        if method == "pearson":
            statistic = float(
                np.sum((xa[keep] - x_hat) ** 2 / x_hat)
                + np.sum((ya[keep] - y_hat) ** 2 / y_hat)
            )
        else:
            statistic = 2.0 * float(
                np.sum(xlogy(xa[keep], xa[keep] / x_hat))
                + np.sum(xlogy(ya[keep], ya[keep] / y_hat))
            )
        return TestResult(
            method=method,
            statistic=statistic,
            p_value=float(stats.chi2.sf(statistic, use_df)),
            null_dist=f"chi-square({use_df})",
            diagnostics={
                "df": float(use_df),
                "categories_retained": float(retained),
            },
        )

    if method in ("chan1", "chan2"):
        if permutations < 1:
            raise DimensionError("needs at least one permutation")
        stat_fn = _chan1 if method == "chan1" else _chan2
        observed = float(stat_fn(xa, ya))
        p_value = _permutation_pvalue(
            xv.counts, yv.counts, observed, stat_fn, permutations, rng
        )
        return TestResult(
            method=method,
            statistic=observed,
            p_value=p_value,
            null_dist=f"permutation({permutations})",
            diagnostics={"categories_retained": float(retained)},
        )

    # pp: debiased squared proportion difference over its null scale
    pi_x = xa / n
    pi_y = ya / m
    numerator = float(np.sum((pi_x - pi_y) ** 2 - xa / n**2 - ya / m**2))
    variance = float(
        np.sum(
            2.0 / n**2 * (pi_x**2 - pi_x / n)
            + 2.0 / m**2 * (pi_y**2 - pi_y / m)
            + 4.0 / (n * m) * pi_x * pi_y
        )
    )
    if variance <= 0:
        raise NumericalError("estimated variance of the statistic is not positive")
    statistic = numerator / math.sqrt(variance)
    sum_sq_x = float(np.sum(pi_x**2))
    sum_sq_y = float(np.sum(pi_y**2))
    return TestResult(
        method="pp",
        statistic=statistic,
        p_value=float(stats.norm.sf(statistic)),
        null_dist="standard-normal",
        diagnostics={
            "numerator": numerator,
            "variance": variance,
            "concentration_x": float(pi_x.max() ** 2 / sum_sq_x) if sum_sq_x else 1.0,
            "concentration_y": float(pi_y.max() ** 2 / sum_sq_y) if sum_sq_y else 1.0,
            "size_balance": float((n + m) * np.sum((pi_x + pi_y) ** 2)),
        },
    )


# ---------------------------------------------------------------------------
# Dirichlet-multinomial


def dirmult_logpmf(x: CountLike, params: DirMultParams) -> float:
    """Log mass of the compound Dirichlet-multinomial distribution."""
    vec = _counts(x)
    if vec.p != params.p:
        raise DimensionError("counts and theta must have the same length")
    counts = vec.counts.astype(float)
    theta = params.theta
    return float(
        gammaln(vec.total + 1.0)
        + gammaln(params.theta0)
        - gammaln(vec.total + params.theta0)
        + np.sum(gammaln(counts + theta) - gammaln(counts + 1.0) - gammaln(theta))
    )


def dirmult_moments(
    params: DirMultParams, n_total: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, covariance, and precision of a Dirichlet-multinomial vector.

    The covariance is the multinomial covariance inflated by the
    overdispersion factor (N + theta0)/(1 + theta0).  It is singular
    (counts sum to N), so the returned precision is the inverse of the
    leading (p-1) x (p-1) block, which is diagonal plus rank-one and
    inverts in closed form.
    """
    n_total = int(n_total)
    if n_total < 1:
        raise DimensionError("total must be at least 1")
    pi = params.theta / params.theta0
    c = n_total * (n_total + params.theta0) / (1.0 + params.theta0)
    mean = n_total * pi
    cov = c * (np.diag(pi) - np.outer(pi, pi))
    lead = pi[:-1]
    rank_one = np.full((params.p - 1, params.p - 1), 1.0 / pi[-1])
    precision = (np.diag(1.0 / lead) + rank_one) / c
    return mean, cov, precision


@dataclass(frozen=True)
class DirMultFit:
    """Converged Dirichlet-multinomial fit.

    ``loglik_path`` records the log-likelihood after every accepted
    iteration, starting from the initial value.
    """

    params: DirMultParams
    loglik: float
    iterations: int
    grad_norm: float
    loglik_path: Tuple[float, ...] = field(default_factory=tuple)


def _dirmult_loglik(counts: np.ndarray, totals: np.ndarray, theta: np.ndarray) -> float:
    theta0 = theta.sum()
    const = gammaln(totals + 1.0).sum() - gammaln(counts + 1.0).sum()
    return float(
        const
        + np.sum(gammaln(theta0) - gammaln(totals + theta0))
        + np.sum(gammaln(counts + theta) - gammaln(theta))
    )


def _dirmult_gradient(
    counts: np.ndarray, totals: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    theta0 = theta.sum()
    n_vec = counts.shape[0]
    common = n_vec * psi(theta0) - psi(totals + theta0).sum()
    return common + psi(counts + theta).sum(axis=0) - n_vec * psi(theta)


def _dirmult_newton_direction(
    counts: np.ndarray, totals: np.ndarray, theta: np.ndarray, grad: np.ndarray
) -> np.ndarray:
    """Solve H d = grad where H = diag(d_k) + c 11' via the rank-one update."""
    theta0 = theta.sum()
    n_vec = counts.shape[0]
    c = float(n_vec * polygamma(1, theta0) - polygamma(1, totals + theta0).sum())
    diag = polygamma(1, counts + theta).sum(axis=0) - n_vec * polygamma(1, theta)
    if np.any(diag >= 0):
        raise NumericalError("Hessian diagonal is not negative (degenerate data)")
    inv_diag_grad = grad / diag
    denom = 1.0 + c * float(np.sum(1.0 / diag))
    if abs(denom) < 1e-14:
        raise NumericalError("rank-one Hessian update is singular")
    return inv_diag_grad - (c * float(inv_diag_grad.sum()) / denom) / diag


def _ronning_init(counts: np.ndarray) -> np.ndarray:
    start = max(float(counts.min()), 0.5)
    return np.full(counts.shape[1], start)


def _moment_init(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    pi_hat = counts.sum(axis=0) / totals.sum()
    props = counts / totals[:, None]
    v = props.var(axis=0, ddof=1)
    usable = (pi_hat > 0) & (pi_hat < 1)
    w = float(np.mean(v[usable] / (pi_hat[usable] * (1.0 - pi_hat[usable]))))
    n_bar = float(totals.mean())
    denom = n_bar * w - 1.0
    theta0 = n_bar * (1.0 - w) / denom if denom > 0 else -1.0
    if not np.isfinite(theta0) or theta0 <= 0:
        theta0 = 1e-3
    return theta0 * pi_hat


def dirmult_fit(
    count_vectors: Sequence[CountLike],
    init: str = "ronning",
    tol: float = 1e-8,
    max_iter: int = 500,
    user_theta: Optional[Sequence[float]] = None,
) -> DirMultFit:
    """Fit Dirichlet-multinomial concentrations by Newton-Raphson.

    The Hessian of the log-likelihood is a negative diagonal plus a
    positive rank-one matrix, so each Newton step costs O(n p).  Steps that
    leave the positive orthant or lower the log-likelihood are halved;
    convergence is declared when the gradient max-norm drops to ``tol``.

    Parameters
    ----------
    count_vectors : sequence of CountVector or integer vectors
        At least two vectors; every category must appear at least once.
    init : {"ronning", "mom", "user"}
        Starting point: the scalar minimum-count rule, moment matching of
        the overdispersion factor, or ``user_theta``.
    tol, max_iter :
        Gradient max-norm target and the iteration budget.
    user_theta : positive vector, required when ``init="user"``.

    Raises
    ------
    NumericalError
        On non-convergence or persistently inadmissible steps.
    """
    vectors = [_counts(v) for v in count_vectors]
    if len(vectors) < 2:
        raise DimensionError("needs at least 2 count vectors")
    p = vectors[0].p
    if any(v.p != p for v in vectors):
        raise DimensionError("count vectors must all have the same length")
    counts = np.stack([v.counts for v in vectors]).astype(float)
    totals = counts.sum(axis=1)
    if np.any(counts.sum(axis=0) == 0):
        raise DimensionError(
            "every category must be observed at least once across the data"
        )
    if max_iter < 1:
        raise DimensionError("max_iter must be at least 1")

    if init == "ronning":
        theta = _ronning_init(counts)
    elif init == "mom":
        theta = _moment_init(counts, totals)
    elif init == "user":
        if user_theta is None:
            raise DimensionError("init='user' requires user_theta")
        theta = np.asarray(user_theta, dtype=float)
        if theta.shape != (p,) or np.any(theta <= 0):
            raise DimensionError("user_theta must be a positive vector of length p")
        theta = theta.copy()
    else:
        raise DimensionError("init must be one of ('ronning', 'mom', 'user')")

    loglik = _dirmult_loglik(counts, totals, theta)
    path = [loglik]
    grad = _dirmult_gradient(counts, totals, theta)
    iterations = 0
    for _ in range(max_iter):
        if float(np.max(np.abs(grad))) <= tol:
            break
        direction = _dirmult_newton_direction(counts, totals, theta, grad)
        step = 1.0
        # Near the optimum the Newton improvement drops below the round-off
        # noise of the log-likelihood itself, so allow that much slack rather
        # than halving a good step into oblivion.
        slack = 1e-12 * (1.0 + abs(loglik))
        for _halving in range(60):
            candidate = theta - step * direction
            if np.all(candidate > 0):
                cand_ll = _dirmult_loglik(counts, totals, candidate)
                if cand_ll >= loglik - slack:
                    break
            step *= 0.5
        else:
            raise NumericalError(
                "step-halving failed to find an admissible improving step"
            )
        if np.array_equal(candidate, theta):
            break  # step is below float resolution; nothing left to gain
        theta = candidate
        loglik = cand_ll
        path.append(loglik)
        grad = _dirmult_gradient(counts, totals, theta)
        iterations += 1
    grad_norm = float(np.max(np.abs(grad)))
    if grad_norm > tol:
        raise NumericalError(
            f"did not converge within {max_iter} iterations (gradient {grad_norm:.2e})"
        )
    return DirMultFit(
        params=DirMultParams(theta),
        loglik=loglik,
        iterations=iterations,
        grad_norm=grad_norm,
        loglik_path=tuple(path),
    )


# ---------------------------------------------------------------------------
# multivariate Bernoulli


def _bit_index(x: np.ndarray, p: int) -> int:
    index = 0
    for k in range(p):
        index = (index << 1) | int(x[k])
    return index


def mvbernoulli_logpmf(x: Sequence[int], params: MvBernoulliParams) -> float:
    """Log mass of a binary vector under the full joint table."""
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size != params.p:
        raise DimensionError("x must be a binary vector of length p")
    if not np.all(np.isin(arr, (0, 1))):
        raise DimensionError("x entries must be 0 or 1")
    value = params.table[_bit_index(arr, params.p)]
    return float(np.log(value)) if value > 0 else float("-inf")


def mvbernoulli_marginal(params: MvBernoulliParams, k: int) -> float:
    """Marginal success probability of component ``k`` (0-based)."""
    p = params.p
    if not 0 <= k < p:
        raise DimensionError(f"component index must lie in [0, {p})")
    states = np.arange(params.table.size)
    mask = (states >> (p - 1 - k)) & 1 == 1
    return float(params.table[mask].sum())


# ---------------------------------------------------------------------------
# correlated Poisson constructions


def bivpois_logpmf(x1: int, x2: int, params: BivariatePoissonParams) -> float:
    """Log mass of the shared-component bivariate Poisson."""
    x1, x2 = int(x1), int(x2)
    if x1 < 0 or x2 < 0:
        return float("-inf")
    z = np.arange(min(x1, x2) + 1, dtype=float)
    log_terms = (
        -(params.lambda1 + params.lambda2 + params.lambda3)
        + xlogy(x1 - z, params.lambda1)
        - gammaln(x1 - z + 1.0)
        + xlogy(x2 - z, params.lambda2)
        - gammaln(x2 - z + 1.0)
        + xlogy(z, params.lambda3)
        - gammaln(z + 1.0)
    )
    if np.all(np.isneginf(log_terms)):
        return float("-inf")
    return float(logsumexp(log_terms))


def mvpois_sample_latent(
    rates: np.ndarray, n: int, rng: RngLike = None
) -> DataMatrix:
    """Sample correlated Poisson vectors from pairwise shared components.

    ``rates`` is symmetric: the diagonal holds each component's own rate
    and entry (j, k) the rate of the latent count shared by components j
    and k, so cov(X_j, X_k) equals rates[j, k] for j != k.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
        raise DimensionError("rates must be a square matrix")
    if not np.array_equal(rates, rates.T):
        raise DimensionError("rates must be symmetric")
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise DimensionError("rates must be nonnegative")
    if n < 1:
        raise DimensionError("needs n >= 1 samples")
    gen = as_generator(rng)
    p = rates.shape[0]
    values = np.zeros((n, p))
    for j in range(p):
        values[:, j] += gen.poisson(rates[j, j], size=n)
        for k in range(j + 1, p):
            if rates[j, k] > 0:
                shared = gen.poisson(rates[j, k], size=n)
                values[:, j] += shared
                values[:, k] += shared
    return DataMatrix(values)


def _poisson_quantile(u: np.ndarray, mu: float) -> np.ndarray:
    if mu == 0.0:
        return np.zeros_like(u)
    clipped = np.clip(u, 1e-300, 1.0 - 1e-16)
    return np.maximum(stats.poisson.ppf(clipped, mu), 0.0)


def bivpois_sample_norta(
    lambda1: float,
    lambda2: float,
    rho_sign: str,
    lambda_star: float,
    n: int,
    rng: RngLike = None,
) -> DataMatrix:
    """Sample a bivariate Poisson pair through shared uniform quantiles.

    Each marginal is split into an independent part and a part driven by a
    common uniform; feeding the antithetic uniform into the second margin
    produces negative correlation, which the shared-component construction
    cannot.  ``lambda_star`` in [0, min(lambda1, lambda2)] controls the
    dependence strength and is taken as given (no correlation targeting).
    """
    lambda1, lambda2 = float(lambda1), float(lambda2)
    if lambda1 < 0 or lambda2 < 0:
        raise DimensionError("rates must be nonnegative")
    if rho_sign not in ("positive", "negative"):
        raise DimensionError("rho_sign must be 'positive' or 'negative'")
    lambda_star = float(lambda_star)
    if not 0.0 <= lambda_star <= min(lambda1, lambda2):
        raise DimensionError(
            f"lambda_star must lie in [0, min(lambda1, lambda2)] = "
            f"[0, {min(lambda1, lambda2)}]"
        )
    if n < 1:
        raise DimensionError("needs n >= 1 samples")
    gen = as_generator(rng)

    swapped = lambda1 > lambda2
    lo, hi = (lambda2, lambda1) if swapped else (lambda1, lambda2)
    shared_hi = hi * lambda_star / lo if lo > 0 else 0.0

    u1 = gen.random(n)
    u2 = gen.random(n)
    u3 = gen.random(n)
    x_lo = _poisson_quantile(u1, lo - lambda_star) + _poisson_quantile(u3, lambda_star)
    u_shared = u3 if rho_sign == "positive" else 1.0 - u3
    x_hi = _poisson_quantile(u2, hi - shared_hi) + _poisson_quantile(
        u_shared, shared_hi
    )
    columns = (x_hi, x_lo) if swapped else (x_lo, x_hi)
    return DataMatrix(np.column_stack(columns))


def mvpois_sample_compound(
    log_mu: Sequence[float],
    log_sigma: np.ndarray,
    n: int,
    rng: RngLike = None,
) -> DataMatrix:
    """Sample Poisson vectors whose rates are jointly log-normal.

    The log-scale covariance imparts dependence between components and
    inflates every marginal variance above its mean.
    """
    mu = np.asarray(log_mu, dtype=float)
    sigma = np.asarray(log_sigma, dtype=float)
    if mu.ndim != 1:
        raise DimensionError("log_mu must be a vector")
    p = mu.size
    if sigma.shape != (p, p):
        raise DimensionError("log_sigma must be p x p")
    scale = max(float(np.max(np.abs(sigma))), 1.0)
    if np.max(np.abs(sigma - sigma.T)) > 1e-8 * scale:
        raise DimensionError("log_sigma must be symmetric")
    if n < 1:
        raise DimensionError("needs n >= 1 samples")
    eigvals, eigvecs = np.linalg.eigh((sigma + sigma.T) / 2.0)
    if eigvals.min() < -1e-8 * scale:
        raise NumericalError("log_sigma is not positive semidefinite")
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    gen = as_generator(rng)
    log_rates = mu + gen.standard_normal((n, p)) @ root.T
    return DataMatrix(gen.poisson(np.exp(log_rates)).astype(float))
