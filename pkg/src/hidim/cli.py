"""Command-line front end.

Four subcommands: ``test`` runs one named test on CSV data and prints a JSON
result; ``simulate`` runs a declarative Monte Carlo study from an INI config
and emits per-replicate CSV records plus a summary JSON; ``scan-k`` sweeps the
eigen-projected Hotelling test over projection dimensions and emits
figure-ready CSV; ``fit`` wraps the concentration-vector and banded-covariance
estimators.

Exit codes: 0 success, 2 input error (bad flags, files, config), 3 numerical
failure (non-convergence, degenerate statistics).  All randomness flows from
``--seed`` (default 0), so identical invocations produce identical bytes;
``simulate`` derives one child stream per replicate, which makes its output
independent of the worker count.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .core import (
    ConvergenceError,
    DimensionError,
    NumericalError,
    RngStream,
    TestResult,
    TwoSample,
    load_data_matrix,
    save_data_matrix,
)
from .covariance import (
    banded_covariance,
    equality_lrt,
    equality_lrt_corrected,
    identity_test_vn,
    identity_test_wn,
    li_chen_test,
    projected_structure_test,
    schott_test,
    sphericity_test_un,
)
from .discrete import dirmult_fit, multinomial_two_sample
from .mean_dependent import StationaryProcessSpec, apr_test, generate_ma_process
from .mean_iid import (
    bai_saranadasa,
    chen_qin,
    chung_fraser,
    clx_max_test,
    dempster,
    hotelling_t2,
    park_ayyala,
    pct,
    srivastava_du,
    zoh_bayes_factor,
)
from .projection import projected_hotelling, raptt, scan_k

SCHEMA_VERSION = 1

_SCENARIOS = (
    "mean_iid",
    "mean_projection_scan",
    "mean_dependent",
    "covariance",
    "multinomial",
)


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _print_json(payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    print(json.dumps(payload, indent=2, sort_keys=True))


def _load_counts(path: str) -> np.ndarray:
    """Read one count vector from CSV (a single row or a single column)."""
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    if values.shape[0] == 1:
        values = values[0]
    elif values.shape[1] == 1:
        values = values[:, 0]
    else:
        raise DimensionError(
            f"{path}: expected a single row or column of counts, "
            f"got shape {values.shape}"
        )
    return values


def _sigma_draw(spec: str, p: int, gen: np.random.Generator) -> np.ndarray:
    """Materialize a covariance spec as a p x p matrix square root.

    "identity", "diag-unif:a,b" (diagonal variances ~ Unif(a,b)) and
    "ar:rho" (correlation rho^|i-j|) are supported; the diagonal kinds return
    a vector of standard deviations, the AR kind a Cholesky factor.
    """
    if spec == "identity":
        return np.ones(p)
    if spec.startswith("diag-unif:"):
        try:
            low, high = (float(v) for v in spec.split(":", 1)[1].split(","))
        except ValueError:
            raise DimensionError(f"bad sigma spec '{spec}'; want diag-unif:a,b")
        if not 0 < low <= high:
            raise DimensionError(f"diag-unif bounds must satisfy 0 < a <= b, got {spec}")
        return np.sqrt(gen.uniform(low, high, size=p))
    if spec.startswith("ar:"):
        try:
            rho = float(spec.split(":", 1)[1])
        except ValueError:
            raise DimensionError(f"bad sigma spec '{spec}'; want ar:rho")
        if not -1 < rho < 1:
            raise DimensionError(f"ar coefficient must lie in (-1, 1), got {rho}")
        idx = np.arange(p)
        return np.linalg.cholesky(rho ** np.abs(idx[:, None] - idx[None, :]))
    raise DimensionError(
        f"unknown sigma spec '{spec}'; choose identity, diag-unif:a,b or ar:rho"
    )


def _apply_root(z: np.ndarray, root: np.ndarray) -> np.ndarray:
    return z * root if root.ndim == 1 else z @ root.T


def _gaussian_pair(
    gen: np.random.Generator, n: int, m: int, p: int, sigma: str, delta: float
) -> TwoSample:
    root = _sigma_draw(sigma, p, gen)
    x = _apply_root(gen.standard_normal((n, p)), root)
    y = _apply_root(gen.standard_normal((m, p)), root) + delta
    return TwoSample.from_arrays(x, y)


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------


def _need_y(args: argparse.Namespace) -> str:
    if args.y is None:
        raise DimensionError(f"method '{args.method}' requires --y")
    return args.y


def _need_k(args: argparse.Namespace) -> int:
    if args.k is None:
        raise DimensionError(f"method '{args.method}' requires --k")
    return args.k


def _run_mean(args: argparse.Namespace, rng: RngStream) -> TestResult:
    s = TwoSample(load_data_matrix(args.x), load_data_matrix(_need_y(args)))
    method = args.method
    if method == "hotelling":
        return hotelling_t2(s)
    if method == "dempster":
        return dempster(s)
    if method == "bs":
        return bai_saranadasa(s)
    if method == "cq":
        return chen_qin(s)
    if method == "sd":
        return srivastava_du(s)
    if method == "pa":
        return park_ayyala(s)
    if method == "pct":
        return pct(s)
    if method == "cf":
        return chung_fraser(s, permutations=args.permutations, rng=rng.child(0))
    if method == "clx":
        return clx_max_test(s, alpha=args.alpha)
    if method == "zoh":
        return zoh_bayes_factor(s, tau0=args.tau0, alpha=args.alpha)
    if method == "proj":
        return projected_hotelling(s, _need_k(args))
    if method == "raptt":
        return raptt(
            s,
            n_projections=args.projections,
            alpha=args.alpha,
            null_reps=args.null_reps,
            rng=rng.child(0),
            k=args.k,
        )
    raise DimensionError(
        f"unknown method '{method}' for family 'mean'; choose from "
        "hotelling, dempster, bs, cq, sd, pa, pct, cf, clx, zoh, proj, raptt"
    )


def _run_dependent(args: argparse.Namespace, rng: RngStream) -> TestResult:
    s = TwoSample(load_data_matrix(args.x), load_data_matrix(_need_y(args)))
    if args.method == "apr":
        return apr_test(s, big_m=args.lags)
    raise DimensionError(
        f"unknown method '{args.method}' for family 'dependent'; choose from apr"
    )


def _run_covariance(args: argparse.Namespace, rng: RngStream) -> TestResult:
    x = load_data_matrix(args.x)
    method = args.method
    if method == "sphericity":
        return sphericity_test_un(x)
    if method == "identity-w":
        return identity_test_wn(x)
    if method == "identity-v":
        return identity_test_vn(x)
    if method == "proj-structure":
        return projected_structure_test(
            x, _need_k(args), which=args.which, rng=rng.child(0)
        )
    y = load_data_matrix(_need_y(args))
    if method == "equality":
        return equality_lrt([x, y])
    if method == "equality-corrected":
        return equality_lrt_corrected(TwoSample(x, y))
    if method == "schott":
        return schott_test([x, y], permutations=args.permutations, rng=rng.child(0))
    if method == "li-chen":
        return li_chen_test(
            TwoSample(x, y), permutations=args.permutations, rng=rng.child(0)
        )
    raise DimensionError(
        f"unknown method '{method}' for family 'covariance'; choose from "
        "sphericity, identity-w, identity-v, equality, equality-corrected, "
        "schott, li-chen, proj-structure"
    )


def _run_multinomial(args: argparse.Namespace, rng: RngStream) -> TestResult:
    x = _load_counts(args.x)
    y = _load_counts(_need_y(args))
    return multinomial_two_sample(
        x,
        y,
        method=args.method,
        permutations=args.permutations,
        rng=rng.child(0),
        df=args.df,
    )


_FAMILIES = {
    "mean": _run_mean,
    "dependent": _run_dependent,
    "covariance": _run_covariance,
    "multinomial": _run_multinomial,
}


_METHOD_FLAGS = {
    "cf": ("permutations",),
    "zoh": ("tau0",),
    "proj": ("k",),
    "raptt": ("projections", "null_reps", "k"),
    "apr": ("lags",),
    "schott": ("permutations",),
    "li-chen": ("permutations",),
    "proj-structure": ("k", "which"),
    "chan1": ("permutations",),
    "chan2": ("permutations",),
    "pearson": ("df",),
    "lrt": ("df",),
}


def _cmd_test(args: argparse.Namespace) -> int:
    result = _FAMILIES[args.family](args, RngStream(args.seed))
    params = {
        "family": args.family,
        "method": args.method,
        "alpha": args.alpha,
        "seed": args.seed,
        "x": args.x,
    }
    if args.y is not None:
        params["y"] = args.y
    for name in _METHOD_FLAGS.get(args.method, ()):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            params[name] = value
    _print_json({**result.to_dict(), "params": params})
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """A declarative Monte Carlo study: scenario, sizes, methods, seed."""

    scenario: str
    n: int
    m: int
    p: int
    replications: int
    alpha: float
    methods: tuple
    seed: int
    model: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scenario not in _SCENARIOS:
            raise DimensionError(
                f"config field 'simulation.scenario': unknown scenario "
                f"'{self.scenario}'; choose from {', '.join(_SCENARIOS)}"
            )
        for name in ("n", "m", "p"):
            if getattr(self, name) < 1:
                raise DimensionError(f"config field 'simulation.{name}': must be >= 1")
        if self.replications < 1:
            raise DimensionError("config field 'simulation.replications': must be >= 1")
        if not 0 < self.alpha < 1:
            raise DimensionError(
                "config field 'simulation.alpha': must lie strictly between 0 and 1"
            )
        if not self.methods:
            raise DimensionError("config field 'simulation.methods': must be non-empty")


@dataclass(frozen=True)
class ResultRecord:
    """One test outcome inside a simulation study."""

    method: str
    replicate: int
    statistic: float
    p_value: float
    reject: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise NumericalError(f"p-value {self.p_value} outside [0, 1]")


def _config_int(section, sect_name: str, key: str, default=None) -> int:
    if key not in section:
        if default is not None:
            return default
        raise DimensionError(f"config field '{sect_name}.{key}': missing")
    try:
        return int(section[key])
    except ValueError:
        raise DimensionError(
            f"config field '{sect_name}.{key}': not an integer ({section[key]!r})"
        )


def _config_float(section, sect_name: str, key: str, default=None) -> float:
    if key not in section:
        if default is not None:
            return default
        raise DimensionError(f"config field '{sect_name}.{key}': missing")
    try:
        return float(section[key])
    except ValueError:
        raise DimensionError(
            f"config field '{sect_name}.{key}': not a number ({section[key]!r})"
        )


def parse_sim_config(path: str) -> SimConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise DimensionError(f"config parse error: {exc}")
    if "simulation" not in parser:
        raise DimensionError("config missing required [simulation] section")
    sim = parser["simulation"]
    if "scenario" not in sim:
        raise DimensionError("config field 'simulation.scenario': missing")
    if "methods" not in sim:
        raise DimensionError("config field 'simulation.methods': missing")
    methods = tuple(
        token.strip() for token in sim["methods"].split(",") if token.strip()
    )
    model = dict(parser["model"]) if "model" in parser else {}
    return SimConfig(
        scenario=sim["scenario"].strip(),
        n=_config_int(sim, "simulation", "n"),
        m=_config_int(sim, "simulation", "m"),
        p=_config_int(sim, "simulation", "p"),
        replications=_config_int(sim, "simulation", "replications"),
        alpha=_config_float(sim, "simulation", "alpha", default=0.05),
        methods=methods,
        seed=_config_int(sim, "simulation", "seed", default=0),
        model=model,
    )


def _model_float(config: SimConfig, key: str, default: float) -> float:
    raw = config.model.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise DimensionError(f"config field 'model.{key}': not a number ({raw!r})")


def _model_int(config: SimConfig, key: str, default: Optional[int]) -> Optional[int]:
    raw = config.model.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise DimensionError(f"config field 'model.{key}': not an integer ({raw!r})")


def _model_pi(config: SimConfig, key: str) -> np.ndarray:
    raw = config.model.get(key, "uniform")
    if raw.strip() == "uniform":
        return np.full(config.p, 1.0 / config.p)
    try:
        pi = np.array([float(v) for v in raw.split(",")])
    except ValueError:
        raise DimensionError(f"config field 'model.{key}': not a probability list")
    if pi.shape[0] != config.p or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-8:
        raise DimensionError(
            f"config field 'model.{key}': needs {config.p} nonnegative entries "
            "summing to 1"
        )
    return pi


def _ma_spec(config: SimConfig, delta: float) -> StationaryProcessSpec:
    raw = config.model.get("ma_theta", "1.0")
    try:
        thetas = [float(v) for v in raw.split(",")]
    except ValueError:
        raise DimensionError(
            f"config field 'model.ma_theta': not a coefficient list ({raw!r})"
        )
    eye = np.eye(config.p)
    return StationaryProcessSpec(
        mu=np.full(config.p, delta), ma_coefficients=[t * eye for t in thetas]
    )


def _replicate_records(config: SimConfig, r: int) -> list:
    """Run every configured method on replicate r's freshly drawn data.

    The replicate is entirely derived from child stream r of the base seed,
    so the result does not depend on which worker executes it.
    """
    gen = RngStream(config.seed).child(r)
    sigma = config.model.get("sigma", "identity")
    delta = _model_float(config, "delta", 0.0)
    alpha = config.alpha
    records = []

    def push(method: str, res: TestResult) -> None:
        reject = res.diagnostics.get("reject", float(res.p_value <= alpha))
        records.append(
            ResultRecord(method, r, float(res.statistic), float(res.p_value), int(reject))
        )

    if config.scenario in ("mean_iid", "mean_projection_scan"):
        s = _gaussian_pair(gen, config.n, config.m, config.p, sigma, delta)
        for method in config.methods:
            push(method, _SIM_MEAN_METHODS[method](s, config, gen))
    elif config.scenario == "mean_dependent":
        lags = _model_int(config, "lags", 1)
        x = generate_ma_process(_ma_spec(config, 0.0), config.n, gen)
        y = generate_ma_process(_ma_spec(config, delta), config.m, gen)
        s = TwoSample(x, y)
        for method in config.methods:
            if method != "apr":
                raise DimensionError(
                    f"config field 'simulation.methods': '{method}' not available "
                    "for scenario mean_dependent (choose apr)"
                )
            push(method, apr_test(s, big_m=lags))
    elif config.scenario == "covariance":
        root_x = _sigma_draw(sigma, config.p, gen)
        root_y = (
            _sigma_draw(config.model["sigma_y"], config.p, gen)
            if "sigma_y" in config.model
            else root_x
        )
        x = _apply_root(gen.standard_normal((config.n, config.p)), root_x)
        y = _apply_root(gen.standard_normal((config.m, config.p)), root_y)
        for method in config.methods:
            push(method, _SIM_COV_METHODS[method](x, y, config, gen))
    elif config.scenario == "multinomial":
        pi_x = _model_pi(config, "pi")
        pi_y = _model_pi(config, "pi_y") if "pi_y" in config.model else pi_x
        x = gen.multinomial(config.n, pi_x)
        y = gen.multinomial(config.m, pi_y)
        permutations = _model_int(config, "permutations", 199)
        for method in config.methods:
            push(
                method,
                multinomial_two_sample(
                    x, y, method=method, permutations=permutations, rng=gen
                ),
            )
    return records


def _sim_mean_method(name: str) -> Callable:
    plain = {
        "hotelling": hotelling_t2,
        "dempster": dempster,
        "bs": bai_saranadasa,
        "cq": chen_qin,
        "sd": srivastava_du,
        "pa": park_ayyala,
        "pct": pct,
    }
    if name in plain:
        return lambda s, config, gen: plain[name](s)
    if name == "cf":
        return lambda s, config, gen: chung_fraser(
            s, permutations=_model_int(config, "permutations", 199), rng=gen
        )
    if name == "clx":
        return lambda s, config, gen: clx_max_test(s, alpha=config.alpha)
    if name == "zoh":
        return lambda s, config, gen: zoh_bayes_factor(
            s, tau0=_model_float(config, "tau0", 1.0), alpha=config.alpha
        )
    if name == "proj":

        def run_proj(s, config, gen):
            k = _model_int(config, "k", None)
            if k is None:
                raise DimensionError("config field 'model.k': required by method proj")
            return projected_hotelling(s, k)

        return run_proj
    if name == "raptt":
        return lambda s, config, gen: raptt(
            s,
            n_projections=_model_int(config, "projections", 50),
            alpha=config.alpha,
            null_reps=_model_int(config, "null_reps", 200),
            rng=gen,
            k=_model_int(config, "k", None),
        )
    raise DimensionError(
        f"config field 'simulation.methods': unknown mean method '{name}'"
    )


def _sim_cov_method(name: str) -> Callable:
    if name == "sphericity":
        return lambda x, y, config, gen: sphericity_test_un(x)
    if name == "identity-w":
        return lambda x, y, config, gen: identity_test_wn(x)
    if name == "identity-v":
        return lambda x, y, config, gen: identity_test_vn(x)
    if name == "equality":
        return lambda x, y, config, gen: equality_lrt([x, y])
    if name == "equality-corrected":
        return lambda x, y, config, gen: equality_lrt_corrected(TwoSample.from_arrays(x, y))
    if name == "schott":
        return lambda x, y, config, gen: schott_test(
            [x, y], permutations=_model_int(config, "permutations", 199), rng=gen
        )
    if name == "li-chen":
        return lambda x, y, config, gen: li_chen_test(
            TwoSample.from_arrays(x, y),
            permutations=_model_int(config, "permutations", 199),
            rng=gen,
        )
    if name == "proj-structure":

        def run_pst(x, y, config, gen):
            k = _model_int(config, "k", None)
            if k is None:
                raise DimensionError(
                    "config field 'model.k': required by method proj-structure"
                )
            return projected_structure_test(
                x, k, which=config.model.get("which", "sphericity"), rng=gen
            )

        return run_pst
    raise DimensionError(
        f"config field 'simulation.methods': unknown covariance method '{name}'"
    )


class _MethodTable(dict):
    def __init__(self, builder: Callable):
        super().__init__()
        self._builder = builder

    def __missing__(self, name: str) -> Callable:
        self[name] = self._builder(name)
        return self[name]


_SIM_MEAN_METHODS = _MethodTable(_sim_mean_method)
_SIM_COV_METHODS = _MethodTable(_sim_cov_method)

_SIM_MULTINOMIAL_METHODS = ("pearson", "lrt", "chan1", "chan2", "pp")


def _validate_methods(config: SimConfig) -> None:
    if config.scenario in ("mean_iid", "mean_projection_scan"):
        for method in config.methods:
            _SIM_MEAN_METHODS[method]
    elif config.scenario == "covariance":
        for method in config.methods:
            _SIM_COV_METHODS[method]
    elif config.scenario == "mean_dependent":
        for method in config.methods:
            if method != "apr":
                raise DimensionError(
                    f"config field 'simulation.methods': '{method}' not available "
                    "for scenario mean_dependent (choose apr)"
                )
    elif config.scenario == "multinomial":
        for method in config.methods:
            if method not in _SIM_MULTINOMIAL_METHODS:
                raise DimensionError(
                    f"config field 'simulation.methods': unknown multinomial "
                    f"method '{method}'"
                )


def _thread_count(requested: Optional[int]) -> int:
    if requested is None:
        env = os.environ.get("HIDIM_THREADS", "").strip()
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise DimensionError(f"HIDIM_THREADS is not an integer: {env!r}")
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise DimensionError("thread count must be at least 1")
    return requested


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = parse_sim_config(args.config)
    _validate_methods(config)
    threads = _thread_count(args.threads)
    reps = config.replications
    if threads == 1:
        batches = [_replicate_records(config, r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda r: _replicate_records(config, r), range(reps)))
    records = [rec for batch in batches for rec in batch]

    with open(args.out, "w") as fh:
        fh.write("method,replicate,statistic,p_value,reject\n")
        for rec in records:
            fh.write(
                f"{rec.method},{rec.replicate},{rec.statistic!r},"
                f"{rec.p_value!r},{rec.reject}\n"
            )

    summary_methods = {}
    for method in config.methods:
        flags = [rec.reject for rec in records if rec.method == method]
        rate = sum(flags) / len(flags)
        summary_methods[method] = {
            "rejection_rate": rate,
            "mc_standard_error": math.sqrt(rate * (1.0 - rate) / len(flags)),
            "replicates": len(flags),
        }
    _print_json(
        {
            "scenario": config.scenario,
            "alpha": config.alpha,
            "replications": reps,
            "seed": config.seed,
            "records_csv": args.out,
            "methods": summary_methods,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# scan-k
# ---------------------------------------------------------------------------


def scan_table(
    ns: Sequence[int],
    ms: Sequence[int],
    p: int,
    deltas: Sequence[float],
    sigma: str,
    seed: int,
    k_min: int = 1,
    k_max: Optional[int] = None,
) -> tuple:
    """Projected-Hotelling p-value curves for every (n, m) x delta combination.

    Returns (header, rows) ready for CSV.  Shift columns for the same (n, m)
    share their noise draw, so the delta effect is not confounded with
    replicate chatter; each (n, m) pair gets its own child stream of ``seed``.
    Curves stop at their own usable limit min(p, n+m-2); shorter curves leave
    trailing cells empty.
    """
    if len(ms) == 1 and len(ns) > 1:
        ms = list(ms) * len(ns)
    if len(ns) != len(ms):
        raise DimensionError(
            f"--n and --m counts differ ({len(ns)} vs {len(ms)})"
        )
    if k_min < 1:
        raise DimensionError("k range must start at 1 or above")
    stream = RngStream(seed)
    header = ["k"]
    columns = []
    top = 0
    for ci, (n, m) in enumerate(zip(ns, ms)):
        gen = stream.child(ci)
        root = _sigma_draw(sigma, p, gen)
        zx = gen.standard_normal((n, p))
        zy = gen.standard_normal((m, p))
        usable = min(p, n + m - 2)
        hi = usable if k_max is None else min(k_max, usable)
        if k_min > hi:
            raise DimensionError(
                f"k range [{k_min}, ...] empty for n={n}, m={m} (usable max {hi})"
            )
        ks = range(k_min, hi + 1)
        x = _apply_root(zx, root)
        for delta in deltas:
            y = _apply_root(zy, root) + delta
            swept = dict(scan_k(TwoSample.from_arrays(x, y), ks))
            header.append(f"p_n{n}_m{m}_d{delta:g}")
            columns.append(swept)
            top = max(top, hi)
    rows = []
    for k in range(k_min, top + 1):
        cells = [str(k)]
        for swept in columns:
            cells.append(repr(swept[k]) if k in swept else "")
        rows.append(cells)
    return header, rows


def _cmd_scan_k(args: argparse.Namespace) -> int:
    header, rows = scan_table(
        ns=args.n,
        ms=args.m,
        p=args.p,
        deltas=args.delta if args.delta else [0.0],
        sigma=args.sigma,
        seed=args.seed,
        k_min=args.k_min,
        k_max=args.k_max,
    )
    lines = [",".join(header)] + [",".join(row) for row in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _cmd_fit(args: argparse.Namespace) -> int:
    if args.model == "dirmult":
        if args.counts is None:
            raise DimensionError("fit dirmult requires --counts")
        counts = np.loadtxt(args.counts, delimiter=",", ndmin=2)
        user_theta = None
        if args.user_theta is not None:
            user_theta = [float(v) for v in args.user_theta.split(",")]
        fit = dirmult_fit(
            counts,
            init=args.init,
            tol=args.tol,
            max_iter=args.max_iter,
            user_theta=user_theta,
        )
        _print_json(
            {
                "model": "dirmult",
                "theta": list(fit.params.theta),
                "theta0": fit.params.theta0,
                "loglik": fit.loglik,
                "iterations": fit.iterations,
                "grad_norm": fit.grad_norm,
                "tol": args.tol,
                "converged": fit.grad_norm <= args.tol,
            }
        )
        return 0
    if args.model == "banding":
        if args.x is None:
            raise DimensionError("fit banding requires --x")
        data = load_data_matrix(args.x)
        k_candidates = None
        if args.k_candidates is not None:
            k_candidates = [int(v) for v in args.k_candidates.split(",")]
        estimate = banded_covariance(
            data, k_candidates=k_candidates, folds=args.folds, rng=RngStream(args.seed)
        )
        if args.out_matrix:
            save_data_matrix(estimate.matrix, args.out_matrix)
        payload = {
            "model": "banding",
            "band_width": estimate.band_width,
            "cv_risk_curve": [[k, risk] for k, risk in estimate.cv_risk_curve],
            "n": data.n,
            "p": data.p,
        }
        if args.out_matrix:
            payload["matrix_csv"] = args.out_matrix
        _print_json(payload)
        return 0
    raise DimensionError(f"unknown fit model '{args.model}'")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hidim",
        description="High-dimensional tests, simulation studies and fits.",
    )
    parser.add_argument("--version", action="version", version=f"hidim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="run one test on CSV data, JSON result")
    test.add_argument("family", choices=sorted(_FAMILIES))
    test.add_argument("--method", required=True)
    test.add_argument("--x", required=True, help="CSV with one observation per row")
    test.add_argument("--y", help="second-sample CSV (two-sample methods)")
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--k", type=int, help="projection dimension")
    test.add_argument("--projections", type=int, default=50)
    test.add_argument("--null-reps", dest="null_reps", type=int, default=200)
    test.add_argument("--permutations", type=int, default=500)
    test.add_argument("--df", type=int, help="chi-square reference df override")
    test.add_argument("--lags", type=int, default=1, help="dependence lag cap")
    test.add_argument("--tau0", type=float, default=1.0, help="prior scale")
    test.add_argument(
        "--which",
        choices=("sphericity", "identity"),
        default="sphericity",
        help="null structure for proj-structure",
    )
    test.set_defaults(handler=_cmd_test)

    sim = sub.add_parser(
        "simulate", help="Monte Carlo study from an INI config; CSV + summary JSON"
    )
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="per-replicate records CSV path")
    sim.add_argument("--threads", type=int, help="worker threads (HIDIM_THREADS, cores)")
    sim.set_defaults(handler=_cmd_simulate)

    scan = sub.add_parser(
        "scan-k", help="projected-test p-value sweep over k; figure-ready CSV"
    )
    scan.add_argument("--n", type=int, action="append", required=True)
    scan.add_argument("--m", type=int, action="append", required=True)
    scan.add_argument("--p", type=int, required=True)
    scan.add_argument("--delta", type=float, action="append")
    scan.add_argument("--sigma", default="identity")
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--k-min", dest="k_min", type=int, default=1)
    scan.add_argument("--k-max", dest="k_max", type=int)
    scan.add_argument("--out", help="CSV path (default: stdout)")
    scan.set_defaults(handler=_cmd_scan_k)

    fit = sub.add_parser("fit", help="parameter estimation, JSON result")
    fit.add_argument("model", choices=("dirmult", "banding"))
    fit.add_argument("--counts", help="CSV of count vectors (dirmult)")
    fit.add_argument("--x", help="CSV data matrix (banding)")
    fit.add_argument("--init", default="ronning", choices=("ronning", "mom", "user"))
    fit.add_argument("--user-theta", dest="user_theta")
    fit.add_argument("--tol", type=float, default=1e-6)
    fit.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    fit.add_argument("--folds", type=int, default=5)
    fit.add_argument("--k-candidates", dest="k_candidates")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out-matrix", dest="out_matrix")
    fit.set_defaults(handler=_cmd_fit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (NumericalError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DimensionError, ValueError, OSError, configparser.Error) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
