"""Shared containers, seeded RNG streams, and dense linear-algebra primitives.

Everything downstream (mean tests, projections, covariance tests, discrete
models, the CLI) builds on the types and helpers here.  All operations are
pure functions of their inputs; randomness always flows through an explicit
stream object or generator, never through global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "DimensionError",
    "NumericalError",
    "ConvergenceError",
    "DataMatrix",
    "TwoSample",
    "RngStream",
    "FactorModelSpec",
    "TestResult",
    "RngLike",
    "as_generator",
    "child_generators",
    "sample_mean",
    "pooled_covariance",
    "sym_eigen",
    "generate_factor_sample",
    "label_permutation_pvalue",
    "load_data_matrix",
    "save_data_matrix",
]


class DimensionError(ValueError):
    """Input shapes or sizes violate a precondition."""


class NumericalError(RuntimeError):
    """A numerically degenerate situation: singular matrix, non-positive
    variance estimate, empty residual variation, and the like."""


class ConvergenceError(NumericalError):
    """An iterative procedure failed to converge."""


def _validated_matrix(values: np.ndarray, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be 2-dimensional, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{what} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """An n x p sample: rows are observations, columns are variables.

    Parameters
    ----------
    values : array_like
        Real matrix with n >= 1 rows and p >= 1 columns; all entries finite.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _validated_matrix(self.values, "DataMatrix"))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TwoSample:
    """A pair of samples on the same p variables.

    Both groups need at least two observations; leave-out trace estimators
    downstream require four or more and check for that themselves.
    """

    x: DataMatrix
    y: DataMatrix

    def __post_init__(self) -> None:
        x = self.x if isinstance(self.x, DataMatrix) else DataMatrix(self.x)
        y = self.y if isinstance(self.y, DataMatrix) else DataMatrix(self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.p != y.p:
            raise DimensionError(
                f"group column counts differ: x has p={x.p}, y has p={y.p}"
            )
        if x.n < 2 or y.n < 2:
            raise DimensionError("each group needs at least 2 observations")

    @classmethod
    def from_arrays(cls, x: np.ndarray, y: np.ndarray) -> "TwoSample":
        return cls(DataMatrix(x), DataMatrix(y))

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def m(self) -> int:
        return self.y.n

    @property
    def p(self) -> int:
        return self.x.p

    def pooled_rows(self) -> np.ndarray:
        """All n + m observations stacked, x group first."""
        return np.vstack([self.x.values, self.y.values])


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Identical (seed, stream_id) pairs yield identical draw sequences; distinct
    stream_ids give streams that are independent by construction.  Children
    derived with :func:`child_generators` extend the spawn key, so replicate
    streams never collide with their parent.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.stream_id, (int, np.integer)) or self.stream_id < 0:
            raise ValueError(
                f"stream_id must be a non-negative integer, got {self.stream_id!r}"
            )

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.default_rng(seq)

    def child(self, index: int) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.seed), spawn_key=(int(self.stream_id), int(index))
        )
        return np.random.default_rng(seq)


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    """Normalize any accepted RNG designator into a numpy Generator.

    ``None`` maps to the default stream ``RngStream(0)`` so that every
    entry point is reproducible out of the box.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        return RngStream(0).generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot interpret {type(rng).__name__} as an RNG source")


def child_generators(rng: RngLike, count: int) -> list[np.random.Generator]:
    """Derive ``count`` mutually independent generators from an RNG source.

    Derivation happens eagerly and deterministically, so work items can be
    dispatched to any number of workers without changing the draws each item
    sees (results are independent of worker count by construction).
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(count))
    if isinstance(rng, RngStream):
        stream = rng
    elif rng is None:
        stream = RngStream(0)
    elif isinstance(rng, (int, np.integer)):
        stream = RngStream(int(rng))
    else:
        raise TypeError(f"cannot interpret {type(rng).__name__} as an RNG source")
    return [stream.child(i) for i in range(count)]


_INNOVATION_LAWS = ("normal", "laplace", "centered_gamma")


@dataclass(frozen=True)
class FactorModelSpec:
    """Data-generating model X = mu + Gamma Z with i.i.d. standardized factors.

    Parameters
    ----------
    mu : array_like, shape (p,)
        Mean vector.
    gamma : array_like, shape (p, q)
        Factor loading matrix; q >= p is allowed.  The implied covariance is
        gamma @ gamma.T.
    innovation_law : {"normal", "laplace", "centered_gamma"}
        Law of the i.i.d. factors, standardized to mean 0 and variance 1.
    shape : float, optional
        Shape parameter, required for (and only for) ``centered_gamma``.

    Notes
    -----
    ``delta`` is the excess of the factor fourth moment over 3: 0 for normal,
    3 for laplace, 6/shape for centered gamma.
    """

    mu: np.ndarray
    gamma: np.ndarray
    innovation_law: str = "normal"
    shape: float | None = None

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=float, copy=True).reshape(-1)
        gamma = _validated_matrix(self.gamma, "gamma")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu contains non-finite entries")
        if mu.shape[0] != gamma.shape[0]:
            raise DimensionError(
                f"mu has length {mu.shape[0]} but gamma has {gamma.shape[0]} rows"
            )
        if self.innovation_law not in _INNOVATION_LAWS:
            raise ValueError(
                f"unknown innovation law {self.innovation_law!r}; "
                f"choose from {_INNOVATION_LAWS}"
            )
        if self.innovation_law == "centered_gamma":
            if self.shape is None or not np.isfinite(self.shape) or self.shape <= 0:
                raise ValueError(
                    "centered_gamma requires a positive finite shape parameter"
                )
        elif self.shape is not None:
            raise ValueError(f"shape is only meaningful for centered_gamma")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)

    @property
    def p(self) -> int:
        return self.gamma.shape[0]

    @property
    def q(self) -> int:
        return self.gamma.shape[1]

    @property
    def delta(self) -> float:
        """Excess of the innovation fourth moment over the Gaussian value 3."""
        if self.innovation_law == "normal":
            return 0.0
        if self.innovation_law == "laplace":
            return 3.0
        return 6.0 / float(self.shape)  # centered_gamma

    def implied_covariance(self) -> np.ndarray:
        return self.gamma @ self.gamma.T


@dataclass(frozen=True)
class TestResult:
    """Outcome of one hypothesis test.

    ``null_dist`` is a short descriptor such as ``standard-normal``,
    ``F(12,37)``, ``chi-square(99)``, ``scaled-chi-square(0.97,102.3)``,
    ``extreme-value-I``, ``permutation(999)``, or ``empirical(200)``.
    ``diagnostics`` maps auxiliary quantity names to values.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    method: str
    statistic: float
    p_value: float
    null_dist: str
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.method:
            raise ValueError("method name must be non-empty")
        stat = float(self.statistic)
        pval = float(self.p_value)
        if not np.isfinite(stat):
            raise ValueError(f"statistic must be finite, got {stat}")
        if not (0.0 <= pval <= 1.0):
            raise ValueError(f"p_value must lie in [0, 1], got {pval}")
        object.__setattr__(self, "statistic", stat)
        object.__setattr__(self, "p_value", pval)
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "null_dist": self.null_dist,
            "diagnostics": {k: float(v) for k, v in self.diagnostics.items()},
        }


# ---------------------------------------------------------------------------
# operations


def _matrix_values(m: Union[DataMatrix, np.ndarray], what: str) -> np.ndarray:
    if isinstance(m, DataMatrix):
        return m.values
    return _validated_matrix(np.asarray(m, dtype=float), what)


def sample_mean(m: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    """Column-wise average of an n x p sample."""
    values = _matrix_values(m, "sample")
    return values.mean(axis=0)


def pooled_covariance(s: TwoSample, biased: bool = False) -> np.ndarray:
    """Pooled covariance of a two-sample dataset.

    The default divisor is n + m - 2 (unbiased under a common covariance);
    ``biased=True`` switches to the n + m divisor used by the raw sample
    covariance convention.
    """
    x = s.x.values
    y = s.y.values
    n, m = s.n, s.m
    if n + m < 3:
        raise DimensionError("pooled covariance needs n + m >= 3")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    ss = xc.T @ xc + yc.T @ yc
    divisor = (n + m) if biased else (n + m - 2)
    out = ss / divisor
    return 0.5 * (out + out.T)


def sym_eigen(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, deterministic ordering.

    Returns (eigenvalues descending, orthonormal eigenvectors as columns).
    Ties keep the solver's original order; each eigenvector's sign is fixed
    by making its largest-magnitude entry positive.

    Raises
    ------
    DimensionError
        If the input is not square.
    ValueError
        If the input is not symmetric within 1e-10 * ||a||_F.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > 1e-10 * max(norm, 1e-300):
        raise ValueError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(sym)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[lead, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    return w, v


def generate_factor_sample(
    spec: FactorModelSpec, n: int, rng: RngLike = None
) -> DataMatrix:
    """Draw n independent rows mu + Gamma Z from a factor model.

    The innovations Z are i.i.d. with mean 0 and variance 1 under the law
    named in the spec.
    """
    if n < 1:
        raise DimensionError("n must be at least 1")
    gen = as_generator(rng)
    q = spec.q
    if spec.innovation_law == "normal":
        z = gen.standard_normal((n, q))
    elif spec.innovation_law == "laplace":
        z = gen.laplace(0.0, 1.0 / np.sqrt(2.0), size=(n, q))
    else:  # centered_gamma
        k = float(spec.shape)
        z = (gen.gamma(k, 1.0, size=(n, q)) - k) / np.sqrt(k)
    return DataMatrix(spec.mu + z @ spec.gamma.T)


def label_permutation_pvalue(
    pooled: np.ndarray,
    n: int,
    statistic,
    permutations: int = 999,
    rng: RngLike = None,
) -> tuple[float, float]:
    """Group-label permutation p-value for a two-sample statistic.

    ``statistic`` maps (x_rows, y_rows) to a real number; larger values count
    as more extreme.  Returns (observed statistic, p-value) with
    p = (1 + #{permuted >= observed}) / (permutations + 1).
    """
    if permutations < 1:
        raise ValueError("permutations must be positive")
    total = pooled.shape[0]
    if not 0 < n < total:
        raise DimensionError("group size must split the pooled rows")
    gen = as_generator(rng)
    observed = float(statistic(pooled[:n], pooled[n:]))
    count = 0
    for _ in range(permutations):
        perm = gen.permutation(total)
        value = float(statistic(pooled[perm[:n]], pooled[perm[n:]]))
        if value >= observed:
            count += 1
    return observed, (1.0 + count) / (permutations + 1.0)


# ---------------------------------------------------------------------------
# CSV interchange: rows = observations, '.' decimal, header only when flagged


def load_data_matrix(path, header: bool = False) -> DataMatrix:
    """Read a DataMatrix from CSV."""
    values = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return DataMatrix(values)


def save_data_matrix(
    m: Union[DataMatrix, np.ndarray], path, header: Sequence[str] | None = None
) -> None:
    """Write a DataMatrix to CSV (round-trip exact for float64)."""
    values = _matrix_values(m, "matrix")
    head = ",".join(header) if header is not None else ""
    np.savetxt(path, values, delimiter=",", fmt="%.17g", header=head, comments="")
