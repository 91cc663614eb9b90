"""Covariance estimation and structure testing.

Banded estimation with cross-validated bandwidth, Gaussian log-likelihood
surfaces with sparsity penalties (single-matrix and joint multi-group), and
hypothesis tests for sphericity, identity, and equality of covariance
matrices, including permutation-calibrated Frobenius-distance tests that
remain usable when p exceeds the group sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg, special, stats

from .core import (
    DataMatrix,
    DimensionError,
    NumericalError,
    RngLike,
    TestResult,
    as_generator,
)
from .core import TwoSample

__all__ = [
    "PenaltySpec",
    "BandedEstimate",
    "band_matrix",
    "banded_covariance",
    "gaussian_loglik_cov",
    "gaussian_loglik_prec",
    "penalized_objective",
    "u_functional",
    "v_functional",
    "w_functional",
    "sphericity_test_un",
    "identity_test_vn",
    "identity_test_wn",
    "equality_lrt",
    "equality_lrt_corrected",
    "schott_fn",
    "schott_test",
    "li_chen_functional",
    "li_chen_test",
    "projected_structure_test",
]

ArrayLike = Union[DataMatrix, np.ndarray]

_JOINT_KINDS = ("fused", "group", "guo")
_PENALTY_KINDS = ("lasso",) + _JOINT_KINDS


def _rows(m: ArrayLike) -> np.ndarray:
    if isinstance(m, DataMatrix):
        return m.values
    values = np.asarray(m, dtype=float)
    if values.ndim != 2:
        raise DimensionError("data must be a 2-d array of rows")
    return values


def _biased_cov(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean(axis=0)
    return centered.T @ centered / values.shape[0]


def _square(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{what} must be a square matrix")
    return matrix


def _spd_cholesky(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = _square(matrix, what)
    scale = np.max(np.abs(matrix)) or 1.0
    if np.max(np.abs(matrix - matrix.T)) > 1e-8 * scale:
        raise DimensionError(f"{what} must be symmetric")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None


# ---------------------------------------------------------------------------
# banding


@dataclass(frozen=True)
class BandedEstimate:
    """Banded covariance estimate with the cross-validation trace behind it.

    ``matrix`` has exact zeros wherever |i - j| >= band_width.
    """

    matrix: np.ndarray
    band_width: int
    cv_risk_curve: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        matrix = _square(self.matrix, "estimate")
        if self.band_width < 1:
            raise DimensionError("band width must be at least 1")
        i, j = np.indices(matrix.shape)
        if np.any(matrix[np.abs(i - j) >= self.band_width] != 0.0):
            raise DimensionError("entries outside the band must be exactly zero")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(
            self,
            "cv_risk_curve",
            tuple((int(k), float(r)) for k, r in self.cv_risk_curve),
        )


def band_matrix(matrix: np.ndarray, k: int) -> np.ndarray:
    """Zero out all entries with |i - j| >= k (k=1 keeps only the diagonal)."""
    matrix = _square(matrix, "matrix")
    if not 1 <= k:
        raise DimensionError("band width must be at least 1")
    i, j = np.indices(matrix.shape)
    out = matrix.copy()
    out[np.abs(i - j) >= k] = 0.0
    return out


def banded_covariance(
    m: ArrayLike,
    k_candidates: Optional[Sequence[int]] = None,
    folds: int = 5,
    rng: RngLike = None,
) -> BandedEstimate:
    """Biased sample covariance banded at a cross-validated width.

    For each candidate width the rows are split into ``folds`` parts; the
    banded covariance of the training part is scored against the raw
    covariance of the held-out part in squared Frobenius norm, and the
    width with the smallest average risk wins (ties go to the smallest).
    """
    values = _rows(m)
    n, p = values.shape
    if folds < 2:
        raise DimensionError("needs at least 2 folds")
    if n < 2 * folds:
        raise DimensionError(f"needs n >= 2*folds = {2 * folds}, got {n}")
    if k_candidates is None:
        candidates = list(range(1, p + 1))
    else:
        candidates = sorted(set(int(k) for k in k_candidates))
        if not candidates:
            raise DimensionError("need at least one candidate width")
        if candidates[0] < 1 or candidates[-1] > p:
            raise DimensionError(f"widths must lie in [1, p] = [1, {p}]")
    gen = as_generator(rng)
    order = gen.permutation(n)
    parts = np.array_split(order, folds)
    risks = np.zeros(len(candidates))
    for part in parts:
        mask = np.ones(n, dtype=bool)
        mask[part] = False
        s_train = _biased_cov(values[mask])
        s_test = _biased_cov(values[part])
        for idx, k in enumerate(candidates):
            diff = band_matrix(s_train, k) - s_test
            risks[idx] += float(np.sum(diff * diff))
    risks /= folds
    best = int(np.argmin(risks))
    chosen = candidates[best]
    return BandedEstimate(
        matrix=band_matrix(_biased_cov(values), chosen),
        band_width=chosen,
        cv_risk_curve=tuple(zip(candidates, risks)),
    )


# ---------------------------------------------------------------------------
# likelihood surfaces and penalties


def gaussian_loglik_cov(sigma: np.ndarray, m: ArrayLike) -> float:
    """-(n/2)[log det Sigma + 2 tr(S Sigma^-1)], S the divisor-n covariance.

    Kept exactly in this form (note the factor 2 on the trace): as written
    the surface is maximized at Sigma = 2S, and evaluating it at 2 Sigma
    differs from the Gaussian log-likelihood of Sigma only by an additive
    constant.  Callers comparing fits of different Sigma on the same data
    can use it directly since constants cancel.
    """
    values = _rows(m)
    n = values.shape[0]
    chol = _spd_cholesky(sigma, "sigma")
    if chol.shape[0] != values.shape[1]:
        raise DimensionError("sigma dimension must match the data columns")
    s = _biased_cov(values)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    trace = float(np.trace(linalg.cho_solve((chol, True), s)))
    return -(n / 2.0) * (logdet + 2.0 * trace)


def gaussian_loglik_prec(omega: np.ndarray, m: ArrayLike) -> float:
    """(n/2)[log det Omega - 2 tr(S Omega)]: the precision-matrix form."""
    values = _rows(m)
    n = values.shape[0]
    chol = _spd_cholesky(omega, "omega")
    if chol.shape[0] != values.shape[1]:
        raise DimensionError("omega dimension must match the data columns")
    s = _biased_cov(values)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    trace = float(np.sum(s * np.asarray(omega, dtype=float)))
    return (n / 2.0) * (logdet - 2.0 * trace)


@dataclass(frozen=True)
class PenaltySpec:
    """Sparsity penalty description.

    kind "lasso" penalizes a single matrix elementwise, lambda1 * sum
    w_ij |a_ij| with optional nonnegative weights (default all ones);
    "fused", "group", and "guo" are joint penalties over K >= 2 precision
    matrices with two levels, lambda1 for within-matrix sparsity and
    lambda2 for cross-matrix agreement.
    """

    kind: str
    lambda1: float = 0.0
    lambda2: float = 0.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in _PENALTY_KINDS:
            raise DimensionError(
                f"unknown penalty kind {self.kind!r}; choose from {_PENALTY_KINDS}"
            )
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise DimensionError("penalty weights must be nonnegative")
        if self.weights is not None:
            if self.kind != "lasso":
                raise DimensionError("weight matrices only apply to the lasso penalty")
            weights = _square(self.weights, "weights")
            if np.any(weights < 0):
                raise DimensionError("weight entries must be nonnegative")
            object.__setattr__(self, "weights", weights)


def _offdiag_abs_sum(matrix: np.ndarray) -> float:
    return float(np.sum(np.abs(matrix)) - np.sum(np.abs(np.diag(matrix))))


def _joint_penalty(spec: PenaltySpec, omegas: Sequence[np.ndarray]) -> float:
    if spec.kind == "fused":
        value = spec.lambda1 * sum(_offdiag_abs_sum(w) for w in omegas)
        for a in range(len(omegas)):
            for b in range(a + 1, len(omegas)):
                value += spec.lambda2 * _offdiag_abs_sum(omegas[a] - omegas[b])
        return value
    # group: lambda2 term is the off-diagonal L2 norm across matrices
    stacked = np.stack(omegas)
    cross = np.sqrt(np.sum(stacked**2, axis=0))
    value = spec.lambda1 * sum(_offdiag_abs_sum(w) for w in omegas)
    return value + spec.lambda2 * _offdiag_abs_sum(cross)


def penalized_objective(
    param,
    m,
    spec: PenaltySpec,
    target: str = "covariance",
) -> float:
    """Gaussian log-likelihood minus the requested sparsity penalty.

    For "lasso", ``param`` is one SPD matrix interpreted per ``target``
    ("covariance" or "precision") and ``m`` one data matrix.  The joint
    kinds take a list of K >= 2 precision matrices (for "guo", the pair
    (theta, [gamma_1..gamma_K]) with Omega_k = theta * gamma_k entrywise)
    and a matching list of data matrices; they are precision-only.
    """
    if target not in ("covariance", "precision"):
        raise DimensionError("target must be 'covariance' or 'precision'")
    if spec.kind == "lasso":
        matrix = np.asarray(param, dtype=float)
        if target == "covariance":
            loglik = gaussian_loglik_cov(matrix, m)
        else:
            loglik = gaussian_loglik_prec(matrix, m)
        weights = spec.weights
        if weights is None:
            weights = np.ones_like(matrix)
        elif weights.shape != matrix.shape:
            raise DimensionError("weight matrix shape must match the parameter")
        return loglik - spec.lambda1 * float(np.sum(weights * np.abs(matrix)))

    if target != "precision":
        raise DimensionError(f"{spec.kind} penalty applies to precision matrices")
    if spec.kind == "guo":
        try:
            theta, gammas = param
        except (TypeError, ValueError):
            raise DimensionError(
                "guo penalty expects (theta, [gamma_1..gamma_K])"
            ) from None
        theta = _square(theta, "theta")
        gammas = [_square(g, "gamma") for g in gammas]
        if len(gammas) < 2:
            raise DimensionError("joint penalties need K >= 2 matrices")
        omegas = [theta * g for g in gammas]
        penalty = spec.lambda1 * _offdiag_abs_sum(theta) + spec.lambda2 * sum(
            _offdiag_abs_sum(g) for g in gammas
        )
    else:
        omegas = [_square(w, "omega") for w in param]
        if len(omegas) < 2:
            raise DimensionError("joint penalties need K >= 2 matrices")
        penalty = _joint_penalty(spec, omegas)
    datasets = list(m)
    if len(datasets) != len(omegas):
        raise DimensionError(
            f"got {len(omegas)} matrices but {len(datasets)} data sets"
        )
    loglik = sum(gaussian_loglik_prec(w, d) for w, d in zip(omegas, datasets))
    return loglik - penalty


# ---------------------------------------------------------------------------
# sphericity and identity


def u_functional(sigma: np.ndarray) -> float:
    """(1/p) tr{(Sigma/(tr Sigma/p) - I)^2}: zero iff all eigenvalues equal."""
    sigma = _square(sigma, "sigma")
    p = sigma.shape[0]
    mean_eig = float(np.trace(sigma)) / p
    if mean_eig <= 0:
        raise NumericalError("matrix trace must be positive")
    diff = sigma / mean_eig - np.eye(p)
    return float(np.sum(diff * diff)) / p


def v_functional(sigma: np.ndarray) -> float:
    """(1/p) tr{(Sigma - I)^2}: zero iff Sigma is the identity."""
    sigma = _square(sigma, "sigma")
    diff = sigma - np.eye(sigma.shape[0])
    return float(np.sum(diff * diff)) / sigma.shape[0]


def w_functional(sigma: np.ndarray, n: int) -> float:
    """V functional with the (p/n)[tr Sigma/p]^2 - p/n finite-sample correction."""
    sigma = _square(sigma, "sigma")
    p = sigma.shape[0]
    if n < 1:
        raise DimensionError("n must be positive")
    return v_functional(sigma) - (p / n) * (float(np.trace(sigma)) / p) ** 2 + p / n


def _chi2_result(method: str, functional: float, n: int, p: int, df: int,
                 extra: dict) -> TestResult:
    statistic = n * p / 2.0 * functional
    diagnostics = {"functional": float(functional), "df": float(df)}
    diagnostics.update(extra)
    return TestResult(
        method=method,
        statistic=float(statistic),
        p_value=float(stats.chi2.sf(statistic, df)),
        null_dist=f"chi-square({df})",
        diagnostics=diagnostics,
    )


def sphericity_test_un(m: ArrayLike) -> TestResult:
    """Test Sigma = sigma^2 I via the scaled eigenvalue-dispersion functional.

    Statistic n p/2 U_n referred to chi-square with p(p+1)/2 - 1 degrees of
    freedom; U_n is invariant under rescaling the data.
    """
    values = _rows(m)
    n, p = values.shape
    s = _biased_cov(values)
    if float(np.trace(s)) <= 0:
        raise NumericalError("sample covariance trace is zero (constant data?)")
    df = p * (p + 1) // 2 - 1
    return _chi2_result(
        "sphericity_un", u_functional(s), n, p, df, {"trace_s": float(np.trace(s))}
    )


def identity_test_vn(m: ArrayLike) -> TestResult:
    """Test Sigma = I via the raw squared-distance functional V_n."""
    values = _rows(m)
    n, p = values.shape
    if n < 2:
        raise DimensionError("needs n >= 2")
    s = _biased_cov(values)
    df = p * (p + 1) // 2
    return _chi2_result(
        "identity_vn", v_functional(s), n, p, df, {"trace_s": float(np.trace(s))}
    )


def identity_test_wn(m: ArrayLike) -> TestResult:
    """Test Sigma = I via the corrected functional W_n (stable for p ~ n)."""
    values = _rows(m)
    n, p = values.shape
    if n < 2:
        raise DimensionError("needs n >= 2")
    s = _biased_cov(values)
    df = p * (p + 1) // 2
    return _chi2_result(
        "identity_wn", w_functional(s, n), n, p, df, {"trace_s": float(np.trace(s))}
    )


# ---------------------------------------------------------------------------
# equality of covariance matrices


def _group_logdets(covs: Sequence[np.ndarray]) -> list:
    out = []
    for g, s in enumerate(covs):
        sign, logdet = np.linalg.slogdet(s)
        if sign <= 0 or not np.isfinite(logdet):
            raise NumericalError(
                f"group {g} sample covariance is singular; the likelihood ratio "
                "needs p < every group size"
            )
        out.append(float(logdet))
    return out


def equality_lrt(groups: Sequence[ArrayLike]) -> TestResult:
    """Likelihood-ratio test that K groups share one covariance matrix.

    Statistic sum_g n_g (log|S_pl| - log|S_g|) >= 0 with divisor-n_g group
    covariances and their size-weighted pool, referred to chi-square with
    (K-1) p (p+1)/2 degrees of freedom.
    """
    data = [_rows(g) for g in groups]
    if len(data) < 2:
        raise DimensionError("needs at least two groups")
    p = data[0].shape[1]
    if any(d.shape[1] != p for d in data):
        raise DimensionError("all groups must have the same number of columns")
    sizes = np.array([d.shape[0] for d in data], dtype=float)
    covs = [_biased_cov(d) for d in data]
    logdets = _group_logdets(covs)
    pooled = sum(n_g * s for n_g, s in zip(sizes, covs)) / sizes.sum()
    sign, logdet_pool = np.linalg.slogdet(pooled)
    if sign <= 0 or not np.isfinite(logdet_pool):
        raise NumericalError("pooled sample covariance is singular")
    statistic = float(sum(n_g * (logdet_pool - ld)
                          for n_g, ld in zip(sizes, logdets)))
    k = len(data)
    df = (k - 1) * p * (p + 1) // 2
    diagnostics = {"log_det_pooled": float(logdet_pool), "groups": float(k)}
    for g, ld in enumerate(logdets):
        diagnostics[f"log_det_group_{g}"] = ld
    return TestResult(
        method="equality_lrt",
        statistic=statistic,
        p_value=float(stats.chi2.sf(statistic, df)),
        null_dist=f"chi-square({df})",
        diagnostics=diagnostics,
    )


def equality_lrt_corrected(s: TwoSample) -> TestResult:
    """Normal-calibrated two-sample covariance LRT for p growing with n.

    Requires equal group sizes.  With scatter matrices W_1, W_2 and their
    sum, L = 2n log|W_1 + W_2| - n log|W_1| - n log|W_2| - 2np log 2 is
    distribution-free under the null; its exact mean and variance follow
    from the log-determinant moments of Wishart matrices (digamma and
    trigamma sums; the covariance between log|W_1 + W_2| and log|W_g|
    equals the variance of the former because their ratio is independent
    of the sum).  The standardized L* is referred to a standard normal.
    """
    n, m = s.n, s.m
    if n != m:
        raise DimensionError(f"needs equal group sizes, got n={n}, m={m}")
    p = s.p
    if p >= n:
        raise DimensionError(f"needs p < n, got p={p}, n={n}")
    x = s.x.values - s.x.values.mean(axis=0)
    y = s.y.values - s.y.values.mean(axis=0)
    w1 = x.T @ x
    w2 = y.T @ y
    logdets = []
    for name, w in (("first", w1), ("second", w2), ("combined", w1 + w2)):
        sign, logdet = np.linalg.slogdet(w)
        if sign <= 0 or not np.isfinite(logdet):
            raise NumericalError(f"the {name} scatter matrix is singular")
        logdets.append(float(logdet))
    l_raw = 2.0 * n * logdets[2] - n * logdets[0] - n * logdets[1] \
        - 2.0 * n * p * np.log(2.0)
    i = np.arange(1, p + 1)
    mean_null = 2.0 * n * float(
        np.sum(special.digamma((2 * n - 1 - i) / 2.0)
               - special.digamma((n - i) / 2.0))
    ) - 2.0 * n * p * np.log(2.0)
    var_null = n**2 * float(
        2.0 * np.sum(special.polygamma(1, (n - i) / 2.0))
        - 4.0 * np.sum(special.polygamma(1, (2 * n - 1 - i) / 2.0))
    )
    if var_null <= 0:
        raise NumericalError(f"null variance is not positive ({var_null:.3g})")
    statistic = (l_raw - mean_null) / np.sqrt(var_null)
    return TestResult(
        method="equality_lrt_corrected",
        statistic=float(statistic),
        p_value=float(stats.norm.sf(statistic)),
        null_dist="standard-normal",
        diagnostics={
            "l_raw": float(l_raw),
            "null_mean": float(mean_null),
            "null_variance": float(var_null),
        },
    )


# ---------------------------------------------------------------------------
# Frobenius-functional equality tests (permutation calibrated)


def _schott_from_covs(covs: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Batched F_n from per-group covariance stacks of shape (..., K, p, p)."""
    k = covs.shape[-3]
    pair_term = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            diff = covs[..., a, :, :] - covs[..., b, :, :]
            pair_term = pair_term + np.sum(diff * diff, axis=(-2, -1))
    tr_sq = np.sum(covs * covs, axis=(-2, -1))
    tr = np.trace(covs, axis1=-2, axis2=-1)
    eta = (sizes + 2.0) * (sizes - 1.0)
    bias = (sizes * (sizes - 2.0) * tr_sq + sizes**2 * tr**2) / (sizes * eta)
    return pair_term - (k - 1) * np.sum(bias, axis=-1)


def _batched_group_covs(pooled: np.ndarray, idx: np.ndarray,
                        sizes: Sequence[int]) -> np.ndarray:
    """Covariance per group per permutation: idx has shape (B, N)."""
    out = []
    start = 0
    for n_g in sizes:
        rows = pooled[idx[:, start:start + n_g]]
        centered = rows - rows.mean(axis=1, keepdims=True)
        out.append(np.matmul(centered.transpose(0, 2, 1), centered) / n_g)
        start += n_g
    return np.stack(out, axis=1)


def schott_fn(groups: Sequence[ArrayLike]) -> float:
    """Pairwise Frobenius distance of group covariances, bias-corrected.

    F_n = sum_{i<j} tr{(S_i - S_j)^2}
        - (K-1) sum_i [n_i(n_i-2) tr(S_i^2) + n_i^2 (tr S_i)^2] / (n_i eta_i)

    with eta_i = (n_i + 2)(n_i - 1) and divisor-n_i covariances; centered
    near zero when all group covariances are equal.
    """
    data = [_rows(g) for g in groups]
    if len(data) < 2:
        raise DimensionError("needs at least two groups")
    p = data[0].shape[1]
    if any(d.shape[1] != p for d in data):
        raise DimensionError("all groups must have the same number of columns")
    if any(d.shape[0] < 2 for d in data):
        raise DimensionError("every group needs at least 2 rows")
    covs = np.stack([_biased_cov(d) for d in data])
    sizes = np.array([d.shape[0] for d in data], dtype=float)
    return float(_schott_from_covs(covs, sizes))


_PERM_CHUNK = 64


def schott_test(
    groups: Sequence[ArrayLike], permutations: int = 500, rng: RngLike = None
) -> TestResult:
    """Permutation test of covariance equality based on the F_n functional.

    Group labels are reshuffled over the pooled rows; the p-value is the
    add-one fraction of permuted functionals at least as large as the
    observed one.
    """
    data = [_rows(g) for g in groups]
    observed = schott_fn(data)
    if permutations < 1:
        raise DimensionError("needs at least one permutation")
    sizes = [d.shape[0] for d in data]
    pooled = np.concatenate(data, axis=0)
    gen = as_generator(rng)
    total = pooled.shape[0]
    size_arr = np.array(sizes, dtype=float)
    exceed = 0
    done = 0
    while done < permutations:
        batch = min(_PERM_CHUNK, permutations - done)
        idx = np.argsort(gen.random((batch, total)), axis=1)
        covs = _batched_group_covs(pooled, idx, sizes)
        values = _schott_from_covs(covs, size_arr)
        exceed += int(np.sum(values >= observed))
        done += batch
    p_value = (1.0 + exceed) / (permutations + 1.0)
    return TestResult(
        method="schott",
        statistic=float(observed),
        p_value=float(p_value),
        null_dist=f"permutation({permutations})",
        diagnostics={"permutations": float(permutations)},
    )


def _li_chen_terms(x: np.ndarray, y: np.ndarray) -> tuple:
    """(A1, A2, A12) from column-mean-centered groups.

    A1 = {n(n-1)}^-1 sum_{i != j} (x_i' x_j)^2 estimates tr(Sigma_1^2);
    A12 averages the squared cross inner products.
    """
    n, m = x.shape[0], y.shape[0]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    gx = xc @ xc.T
    gy = yc @ yc.T
    a1 = (np.sum(gx * gx) - np.sum(np.diag(gx) ** 2)) / (n * (n - 1))
    a2 = (np.sum(gy * gy) - np.sum(np.diag(gy) ** 2)) / (m * (m - 1))
    cross = xc @ yc.T
    a12 = np.sum(cross * cross) / (n * m)
    return float(a1), float(a2), float(a12)


def li_chen_functional(s: TwoSample) -> float:
    """Inner-product U-statistic estimate of tr{(Sigma_1 - Sigma_2)^2}."""
    if s.n < 4 or s.m < 4:
        raise DimensionError("needs n >= 4 and m >= 4")
    a1, a2, a12 = _li_chen_terms(s.x.values, s.y.values)
    return a1 + a2 - 2.0 * a12


def li_chen_test(
    s: TwoSample, permutations: int = 500, rng: RngLike = None
) -> TestResult:
    """Permutation test of covariance equality via the trace-distance estimate."""
    observed = li_chen_functional(s)
    if permutations < 1:
        raise DimensionError("needs at least one permutation")
    pooled = s.pooled_rows()
    n, total = s.n, s.n + s.m
    gen = as_generator(rng)
    exceed = 0
    done = 0
    while done < permutations:
        batch = min(_PERM_CHUNK, permutations - done)
        idx = np.argsort(gen.random((batch, total)), axis=1)
        for row in idx:
            a1, a2, a12 = _li_chen_terms(pooled[row[:n]], pooled[row[n:]])
            if a1 + a2 - 2.0 * a12 >= observed:
                exceed += 1
        done += batch
    p_value = (1.0 + exceed) / (permutations + 1.0)
    return TestResult(
        method="li_chen",
        statistic=float(observed),
        p_value=float(p_value),
        null_dist=f"permutation({permutations})",
        diagnostics={"permutations": float(permutations)},
    )


# ---------------------------------------------------------------------------
# projected structure tests


def projected_structure_test(
    m: ArrayLike, k: int, which: str = "sphericity", rng: RngLike = None
) -> TestResult:
    """Sphericity or identity test after a Haar random projection to k axes.

    Experimental: both null hypotheses are preserved by orthonormal
    projection (R Sigma R' = sigma^2 I when Sigma = sigma^2 I), so the
    projected rows are handed to the corresponding unprojected test.  The
    calibration is conditional on the drawn R.
    """
    values = _rows(m)
    p = values.shape[1]
    if which not in ("sphericity", "identity"):
        raise DimensionError("which must be 'sphericity' or 'identity'")
    if not 1 <= k <= p:
        raise DimensionError(f"needs 1 <= k <= p = {p}")
    gen = as_generator(rng)
    seed_matrix = gen.standard_normal((p, k))
    q, r = np.linalg.qr(seed_matrix)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    projected = values @ (q * signs)
    if which == "sphericity":
        inner = sphericity_test_un(projected)
    else:
        inner = identity_test_wn(projected)
    diagnostics = dict(inner.diagnostics)
    diagnostics["k"] = float(k)
    return TestResult(
        method=f"projected_{which}",
        statistic=inner.statistic,
        p_value=inner.p_value,
        null_dist=inner.null_dist,
        diagnostics=diagnostics,
    )
