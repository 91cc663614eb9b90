"""Random-projection machinery for mean testing in high dimension.

Includes the eigenbasis projected Hotelling test and its k-sweep, the
projection-matrix generators (dense and sparse i.i.d. families, Haar
orthogonal, block-weighted), the single-projection exact test, and the
averaged-p-value exact test that aggregates many independent projections
against a simulated null cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .core import (
    DimensionError,
    NumericalError,
    RngLike,
    RngStream,
    TestResult,
    TwoSample,
    as_generator,
    pooled_covariance,
    sym_eigen,
)

__all__ = [
    "ProjectionSpec",
    "ProjectionMatrix",
    "generate_projection",
    "projected_hotelling",
    "scan_k",
    "t2_random_projection",
    "raptt",
    "raptt_cutoff",
]

_KINDS = (
    "gaussian",
    "uniform_sqrt3",
    "sign",
    "sparse",
    "haar_orthogonal",
    "block_weighted",
)

# relative floor under which pooled-covariance eigenvalues count as zero
_EIG_RTOL = 1e-10


@dataclass(frozen=True)
class ProjectionSpec:
    """Recipe for a k x p random projection matrix.

    ``theta`` applies only to the sparse kind (entries +-sqrt(theta) with
    probability 1/(2 theta) each, zero otherwise); when omitted it defaults
    to sqrt(p) at generation time.
    """

    kind: str
    k: int
    seed: RngStream
    theta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown projection kind {self.kind!r}; choose from {_KINDS}")
        if self.k < 1:
            raise DimensionError("target dimension k must be at least 1")
        if self.theta is not None:
            if self.kind != "sparse":
                raise ValueError("theta applies only to the sparse kind")
            if not np.isfinite(self.theta) or self.theta < 1:
                raise ValueError("theta must be a finite real >= 1")
        if not isinstance(self.seed, RngStream):
            raise TypeError("seed must be an RngStream")


@dataclass(frozen=True)
class ProjectionMatrix:
    """A realized projection with the spec that generated it."""

    values: np.ndarray
    spec: ProjectionSpec

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def _draw_projection_batch(
    gen: np.random.Generator,
    kind: str,
    count: int,
    k: int,
    p: int,
    theta: Optional[float],
) -> np.ndarray:
    """Draw ``count`` independent k x p projection matrices as a (count,k,p) array."""
    if kind == "gaussian":
        return gen.standard_normal((count, k, p))
    if kind == "uniform_sqrt3":
        root3 = np.sqrt(3.0)
        return gen.uniform(-root3, root3, size=(count, k, p))
    if kind == "sign":
        return 2.0 * gen.integers(0, 2, size=(count, k, p)).astype(float) - 1.0
    if kind == "sparse":
        th = np.sqrt(p) if theta is None else float(theta)
        u = gen.random((count, k, p))
        root = np.sqrt(th)
        out = np.zeros((count, k, p))
        out[u < 0.5 / th] = root
        out[(u >= 0.5 / th) & (u < 1.0 / th)] = -root
        return out
    if kind == "haar_orthogonal":
        if k > p:
            raise DimensionError(f"haar projection needs k <= p (got k={k}, p={p})")
        g = gen.standard_normal((count, p, k))
        q, r = np.linalg.qr(g)
        diag = np.diagonal(r, axis1=-2, axis2=-1).copy()
        signs = np.sign(diag)
        signs[signs == 0] = 1.0
        q = q * signs[:, None, :]
        return np.ascontiguousarray(np.transpose(q, (0, 2, 1)))
    if kind == "block_weighted":
        if k > p:
            raise DimensionError(f"block projection needs k <= p (got k={k}, p={p})")
        row = np.zeros((k, p))
        blocks = np.array_split(np.arange(p), k)
        for i, block in enumerate(blocks):
            row[i, block] = 1.0 / np.sqrt(block.size)
        return np.broadcast_to(row, (count, k, p)).copy()
    raise ValueError(f"unknown projection kind {kind!r}")


def generate_projection(spec: ProjectionSpec, p: int) -> ProjectionMatrix:
    """Realize a projection matrix from its spec, reproducibly.

    The matrix must have full row rank; a degenerate draw (possible for very
    sparse settings) raises rather than returning a deficient projection.
    """
    if p < 1:
        raise DimensionError("p must be at least 1")
    if spec.kind in ("haar_orthogonal", "block_weighted") and spec.k > p:
        raise DimensionError(
            f"{spec.kind} projection needs k <= p (got k={spec.k}, p={p})"
        )
    gen = spec.seed.generator()
    values = _draw_projection_batch(gen, spec.kind, 1, spec.k, p, spec.theta)[0]
    if np.linalg.matrix_rank(values) < spec.k:
        raise NumericalError("drawn projection matrix is rank deficient")
    return ProjectionMatrix(values=values, spec=spec)


# ---------------------------------------------------------------------------
# eigenbasis projections


def _eigen_quad_terms(s: TwoSample):
    """Eigenvalues, usable count, and per-eigendirection quadratic terms."""
    cov = pooled_covariance(s)
    eigenvalues, vectors = sym_eigen(cov)
    if eigenvalues[0] <= 0:
        raise NumericalError("pooled covariance has no positive eigenvalues")
    usable = int(np.sum(eigenvalues > _EIG_RTOL * eigenvalues[0]))
    usable = min(usable, s.n + s.m - 2)
    d = s.x.values.mean(axis=0) - s.y.values.mean(axis=0)
    coords = vectors.T @ d
    terms = coords[:usable] ** 2 / eigenvalues[:usable]
    return eigenvalues, usable, terms


def projected_hotelling(s: TwoSample, k: int) -> TestResult:
    """Hotelling test restricted to the top-k eigendirections of pooled S.

    statistic = (n+m-k-1)/((n+m-2) k) * (nm/(n+m)) *
    sum_{j<=k} (Vbar_j)^2 / lambda_j, referenced against F(k, n+m-k-1).
    Eigenvalues below 1e-10 of the largest count as zero; asking for more
    directions than are usable is an error.
    """
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    if not 1 <= k <= min(p, big_n - 2):
        raise DimensionError(
            f"k must satisfy 1 <= k <= min(p, n+m-2) = {min(p, big_n - 2)}, got {k}"
        )
    _, usable, terms = _eigen_quad_terms(s)
    if k > usable:
        raise NumericalError(
            f"k={k} exceeds the {usable} positive eigenvalues of pooled S"
        )
    df2 = big_n - k - 1
    stat = (df2 / ((big_n - 2) * k)) * (n * m / big_n) * float(terms[:k].sum())
    return TestResult(
        method="projected_hotelling",
        statistic=stat,
        p_value=float(stats.f.sf(stat, k, df2)),
        null_dist=f"F({k},{df2})",
        diagnostics={"k": float(k)},
    )


def scan_k(s: TwoSample, k_range: Iterable[int]) -> list[tuple[int, float]]:
    """p-value sweep of the eigen-projected Hotelling test over k.

    One eigendecomposition serves the whole sweep.  When p > n+m-2 the
    pooled covariance is rank deficient and only its positive spectrum (at
    most n+m-2 directions) is available; requesting k beyond that raises.
    """
    n, m = s.n, s.m
    big_n = n + m
    ks = [int(k) for k in k_range]
    if not ks:
        return []
    _, usable, terms = _eigen_quad_terms(s)
    cumulative = np.cumsum(terms)
    out = []
    for k in ks:
        if not 1 <= k <= min(s.p, big_n - 2):
            raise DimensionError(
                f"k must satisfy 1 <= k <= min(p, n+m-2), got {k}"
            )
        if k > usable:
            raise NumericalError(
                f"k={k} exceeds the {usable} positive eigenvalues of pooled S"
            )
        df2 = big_n - k - 1
        stat = (df2 / ((big_n - 2) * k)) * (n * m / big_n) * float(cumulative[k - 1])
        out.append((k, float(stats.f.sf(stat, k, df2))))
    return out


# ---------------------------------------------------------------------------
# explicit random projections


def t2_random_projection(
    s: TwoSample, r: Union[ProjectionMatrix, np.ndarray]
) -> TestResult:
    """Hotelling test of the data pushed through one projection matrix.

    Exactly invariant under R -> AR for invertible A (the projected pooled
    covariance sandwiches A away); with R = I it is the ordinary Hotelling
    test.  Needs k < n+m-2 and an invertible projected covariance.
    """
    values = r.values if isinstance(r, ProjectionMatrix) else np.asarray(r, dtype=float)
    if values.ndim != 2:
        raise DimensionError("projection matrix must be 2-dimensional")
    k, p = values.shape
    if p != s.p:
        raise DimensionError(
            f"projection has {p} columns but the data have {s.p} variables"
        )
    n, m = s.n, s.m
    big_n = n + m
    if k >= big_n - 2:
        raise DimensionError(f"needs k < n + m - 2 (got k={k}, n+m={big_n})")
    x = s.x.values @ values.T
    y = s.y.values @ values.T
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    cov = (xc.T @ xc + yc.T @ yc) / (big_n - 2)
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() <= 1e-12 * max(np.trace(cov) / k, 1e-300):
        raise NumericalError("projected pooled covariance is singular")
    d = x.mean(axis=0) - y.mean(axis=0)
    quad = float(d @ np.linalg.solve(cov, d))
    df2 = big_n - k - 1
    stat = (df2 / ((big_n - 2) * k)) * (n * m / big_n) * quad
    return TestResult(
        method="t2_random_projection",
        statistic=stat,
        p_value=float(stats.f.sf(stat, k, df2)),
        null_dist=f"F({k},{df2})",
        diagnostics={"k": float(k)},
    )


def _batched_hotelling_pvalues(z: np.ndarray, n: int, k: int) -> np.ndarray:
    """Projected-Hotelling p-values for a (B, n+m, k) stack of datasets."""
    big_n = z.shape[1]
    m = big_n - n
    x = z[:, :n, :]
    y = z[:, n:, :]
    xbar = x.mean(axis=1)
    ybar = y.mean(axis=1)
    xc = x - xbar[:, None, :]
    yc = y - ybar[:, None, :]
    cov = (
        np.matmul(xc.transpose(0, 2, 1), xc) + np.matmul(yc.transpose(0, 2, 1), yc)
    ) / (big_n - 2)
    d = xbar - ybar
    try:
        sol = np.linalg.solve(cov, d[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "a projected pooled covariance is singular (a degenerate projection "
            "draw, e.g. an all-zero sparse row, can cause this)"
        ) from exc
    quad = np.einsum("bj,bj->b", d, sol)
    df2 = big_n - k - 1
    statistic = (df2 / ((big_n - 2) * k)) * (n * m / big_n) * quad
    return stats.f.sf(statistic, k, df2)


def raptt(
    s: TwoSample,
    n_projections: int = 50,
    kind: str = "haar_orthogonal",
    alpha: float = 0.05,
    null_reps: int = 200,
    rng: RngLike = None,
    k: Optional[int] = None,
    theta: Optional[float] = None,
) -> TestResult:
    """Averaged-p-value exact test over many independent random projections.

    The observed statistic is pbar, the average over ``n_projections``
    single-projection p-values.  Its null distribution is simulated from
    standard Gaussian data (the null law does not depend on the unknown mean
    or scale), each simulation drawing its own fresh projections.  Small pbar
    is evidence against the null: the reported p-value is
    (1 + #{null pbar <= observed pbar}) / (null_reps + 1) and the test
    rejects when it is <= alpha.  Diagnostics carry the alpha-quantile cutoff
    and the upper-quantile value psi_alpha.
    """
    n, m, p = s.n, s.m, s.p
    big_n = n + m
    if n_projections < 1:
        raise ValueError("n_projections must be at least 1")
    if null_reps < 50:
        raise ValueError("null_reps must be at least 50 for a usable cutoff")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if k is None:
        k = big_n // 2
    if not 1 <= k < big_n - 2:
        raise DimensionError(f"needs 1 <= k < n + m - 2 (got k={k}, n+m={big_n})")
    if k > p:
        raise DimensionError(f"needs k <= p (got k={k}, p={p})")
    gen = as_generator(rng)
    # The per-projection p-value is exactly invariant under R -> AR for
    # invertible A, and the orthonormalized matrix is such a transform of the
    # Gaussian matrix it is built from, so the QR step can be skipped here.
    draw_kind = "gaussian" if kind == "haar_orthogonal" else kind

    def _pbar_for(data: np.ndarray, count: int) -> np.ndarray:
        """pbar for ``count`` stacked datasets (count, n+m, p), fresh projections each."""
        flat_r = _draw_projection_batch(
            gen, draw_kind, count * n_projections, k, p, theta
        ).reshape(count, n_projections * k, p)
        z = np.matmul(data, np.transpose(flat_r, (0, 2, 1)))
        z = z.reshape(count, big_n, n_projections, k)
        z = np.ascontiguousarray(np.transpose(z, (0, 2, 1, 3)))
        z = z.reshape(count * n_projections, big_n, k)
        pvals = _batched_hotelling_pvalues(z, n, k).reshape(count, n_projections)
        return pvals.mean(axis=1)

    observed = float(_pbar_for(s.pooled_rows()[None, :, :], 1)[0])

    chunk = 32  # fixed so the draw sequence never depends on memory heuristics
    null_pbars = np.empty(null_reps)
    done = 0
    while done < null_reps:
        b = min(chunk, null_reps - done)
        data = gen.standard_normal((b, big_n, p))
        null_pbars[done : done + b] = _pbar_for(data, b)
        done += b

    p_value = (1.0 + float(np.sum(null_pbars <= observed))) / (null_reps + 1.0)
    cutoff_low = float(np.sort(null_pbars)[max(0, int(np.ceil(alpha * null_reps)) - 1)])
    return TestResult(
        method="raptt",
        statistic=observed,
        p_value=p_value,
        null_dist=f"empirical({null_reps})",
        diagnostics={
            "pbar": observed,
            "cutoff_alpha_quantile": cutoff_low,
            "psi_alpha": raptt_cutoff(null_pbars, alpha),
            "reject": float(p_value <= alpha),
            "k": float(k),
            "n_projections": float(n_projections),
        },
    )


def raptt_cutoff(pbar_values: Sequence[float], alpha: float) -> float:
    """Upper empirical quantile pbar_[ceil(M(1-alpha))] of null averaged p-values.

    A monotone non-increasing function of alpha by construction (it walks
    down the sorted sample).
    """
    values = np.sort(np.asarray(pbar_values, dtype=float))
    m_count = values.shape[0]
    if m_count == 0:
        raise ValueError("need at least one null value")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    index = min(m_count - 1, max(0, int(np.ceil(m_count * (1.0 - alpha))) - 1))
    return float(values[index])
