"""Configuration-driven scaling experiments.

A run sweeps one size parameter over a grid, repeats each grid point for a
number of seeded trials, records the NSEE of every trial and fits the slope
of ``log(mean NSEE)`` against ``log(grid value)``.

Families and their swept parameter:

==================  =====  ===========================================
family              param  estimator(s)
==================  =====  ===========================================
``sweep_m``         m      dense rank-r truncation
``sweep_n``         n      dense rank-r truncation
``sweep_m_sparse``  m      sparse sequential projection
``sweep_s``         s      sparse sequential projection
``robustness``      m      dense, baseline plus violated variants
``phd_compare``     m      dense SVD estimate and pHd, same samples
==================  =====  ===========================================

Trial seeds are ``derive_seed(base_seed, grid_index, trial_index)``; the
results do not depend on the number of worker threads.
"""

import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import phd_estimate, phd_split_error
from .errors import ConfigError, InputError, JointDRError
from .estimator import (
    MomentSpec,
    estimate_moments,
    linear_estimate,
    rank_r_truncate,
    sparse_estimate,
    whiten,
)
from .metrics import nsee, slope_fit
from .synthetic import (
    EmbeddingPair,
    FeatureDistribution,
    LinkModel,
    derive_seed,
    generate_samples,
    sample_problem,
    trial_streams,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("family", "grid_param", "grid_value", "trial", "seed", "nsee", "runtime_ms")
FAMILIES = ("sweep_m", "sweep_n", "sweep_m_sparse", "sweep_s", "robustness", "phd_compare")
GRID_PARAM = {
    "sweep_m": "m",
    "sweep_n": "n",
    "sweep_m_sparse": "m",
    "sweep_s": "s",
    "robustness": "m",
    "phd_compare": "m",
}
SPARSE_FAMILIES = ("sweep_m_sparse", "sweep_s")
VARIANTS = ("none", "sample_moments", "uniform", "poisson", "correlated")
WHITEN_MODES = ("none", "given", "sample")
SEED_RULE = "trial seed = SeedSequence(base_seed, spawn_key=(grid_index, trial_index)).generate_state(1, uint64)[0]"
THREADS_ENV = "JOINTDR_THREADS"

# default grids and the sizes held fixed along each sweep
DEFAULTS = {
    "sweep_m": {"grid": (1000, 2000, 5000, 10000), "fixed": {"n": 100}},
    "sweep_n": {"grid": (50, 100, 200, 500), "fixed": {"m": 20000}},
    "sweep_m_sparse": {"grid": (10000, 20000, 50000, 100000), "fixed": {"n": 1000, "s": 10}},
    "sweep_s": {"grid": (10, 20, 50, 100), "fixed": {"n": 1000, "m": 20000}},
    "robustness": {"grid": (100000, 200000, 500000), "fixed": {"n": 100}},
    "phd_compare": {"grid": (1000, 2000, 5000, 10000), "fixed": {"n": 10}},
}


def _normalize_fixed(fixed):
    out = {}
    for key, value in dict(fixed).items():
        if key == "n":
            out.setdefault("n1", int(value))
            out.setdefault("n2", int(value))
        elif key == "s":
            out.setdefault("s1", int(value))
            out.setdefault("s2", int(value))
        elif key in ("n1", "n2", "s1", "s2", "m", "r"):
            out[key] = int(value)
        else:
            raise ConfigError(f"unknown fixed size {key!r}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a family, a model, a grid and the sizes held fixed.

    ``fixed`` accepts ``n``/``s`` as shorthands for equal ``n1 = n2`` and
    ``s1 = s2``. ``whiten`` applies to every estimate (``"given"`` uses the
    distribution's moments, ``"sample"`` estimated ones). ``variants`` lists
    the violated settings of a robustness run; ``phd_mode`` selects the pHd
    variant for ``phd_compare``.
    """

    family: str
    model: LinkModel
    dist: FeatureDistribution = field(default_factory=FeatureDistribution)
    grid: tuple = ()
    fixed: dict = field(default_factory=dict)
    trials: int = 100
    base_seed: int = 0
    whiten: str = "none"
    variants: tuple = ("sample_moments",)
    phd_mode: str = "blockwise"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        grid = tuple(int(g) for g in self.grid)
        if len(grid) < 3:
            raise ConfigError(f"grid needs at least 3 points, got {len(grid)}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"grid must be strictly increasing: {grid}")
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.whiten not in WHITEN_MODES:
            raise ConfigError(f"unknown whiten mode {self.whiten!r}")
        variants = (self.variants,) if isinstance(self.variants, str) else tuple(self.variants)
        bad = [v for v in variants if v not in VARIANTS]
        if bad or not variants:
            raise ConfigError(f"robustness variants must be a non-empty subset of {VARIANTS}, got {variants}")
        if self.phd_mode not in ("stacked", "blockwise"):
            raise ConfigError(f"unknown pHd mode {self.phd_mode!r}")
        fixed = _normalize_fixed(self.fixed)
        if fixed.pop("r", self.model.r) != self.model.r:
            raise ConfigError(f"fixed r={self.fixed.get('r')} disagrees with model r={self.model.r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "variants", variants)
        for value in grid:
            self._check_sizes(self.sizes_at(value))

    @property
    def grid_param(self):
        return GRID_PARAM[self.family]

    @property
    def sparse(self):
        return self.family in SPARSE_FAMILIES

    def series_names(self):
        if self.family == "phd_compare":
            return ("svd", "phd")
        if self.family == "robustness":
            return ("baseline",) + self.variants
        return ("svd",)

    def sizes_at(self, value):
        sizes = dict(self.fixed, r=self.model.r)
        param = self.grid_param
        if param == "n":
            sizes["n1"] = sizes["n2"] = value
        elif param == "s":
            sizes["s1"] = sizes["s2"] = value
        else:
            sizes["m"] = value
        return sizes

    def _check_sizes(self, sizes):
        needed = ["n1", "n2", "m"] + (["s1", "s2"] if self.sparse else [])
        missing = [k for k in needed if k not in sizes]
        if missing:
            raise ConfigError(f"{self.family} needs fixed sizes {missing}")
        r, n1, n2 = sizes["r"], sizes["n1"], sizes["n2"]
        if sizes["m"] < 1 or not 1 <= r <= min(n1, n2):
            raise ConfigError(f"infeasible sizes {sizes}")
        if self.sparse and not (r < sizes["s1"] < n1 and r < sizes["s2"] < n2):
            raise ConfigError(f"sparse sizes need r < s < n, got {sizes}")

    def to_dict(self):
        return {
            "family": self.family,
            "model": self.model.to_dict(),
            "dist": self.dist.to_dict(),
            "grid": list(self.grid),
            "fixed": dict(self.fixed),
            "trials": self.trials,
            "base_seed": int(self.base_seed),
            "whiten": self.whiten,
            "variants": list(self.variants),
            "phd_mode": self.phd_mode,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            fixed = dict(d.get("fixed", {}))
            model = dict(d["model"])
            model.setdefault("r", fixed.get("r", 2))
            d["model"] = LinkModel.from_dict(model)
            d["dist"] = FeatureDistribution.from_dict(d.get("dist", {}))
            if "variants" in d and not isinstance(d["variants"], str):
                d["variants"] = tuple(d["variants"])
            return cls(**d)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def default_config(family, link=None, **overrides):
    """Harness defaults for ``family``.

    ``link`` picks the model: ``"bilinear"`` (Gaussian noise, ``sigma_z = 1``,
    the default), ``"binary"``, ``"even"`` or a :class:`LinkModel`. Keyword
    overrides naming a config field replace it; size keywords (``n``, ``m``,
    ``s``, ``n1``, ...) update ``fixed``; ``r`` sets the embedding dimension.
    """
    if family not in DEFAULTS:
        raise ConfigError(f"unknown family {family!r}")
    r = int(overrides.pop("r", 2))
    if link is None or link == "bilinear":
        model = LinkModel("bilinear_gaussian", r, sigma_z=1.0)
    elif link == "binary":
        model = LinkModel("binary_exp", r)
    elif link == "even":
        model = LinkModel("even_poly", r)
    elif isinstance(link, LinkModel):
        model = link
    else:
        raise ConfigError(f"unknown link {link!r}")
    base = DEFAULTS[family]
    fixed = dict(base["fixed"])
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {"family": family, "model": model, "grid": base["grid"]}
    for key, value in overrides.items():
        if key in fields:
            kwargs[key] = value
        else:
            if key in ("n", "n1", "n2"):
                fixed.pop("n", None)
            if key in ("s", "s1", "s2"):
                fixed.pop("s", None)
            fixed[key] = value
    kwargs["fixed"] = {**fixed, **kwargs.get("fixed", {})}
    return ExperimentConfig(**kwargs)


@dataclass
class ExperimentResult:
    """Per-trial NSEE values, per-grid-point aggregates and fitted slopes.

    Arrays are indexed ``[grid_index, trial]`` and keyed by series name
    (``"svd"``, ``"phd"``, ``"baseline"`` or a robustness variant). Trials of an
    aborted grid point hold NaN and the result is marked ``partial``.
    """

    family: str
    grid_param: str
    grid_values: list
    series: list
    seeds: np.ndarray
    nsee: dict
    runtime_ms: dict
    mean_log_error: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    partial: bool = False
    errors: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, family, grid_param="m", series=("svd",)):
        return cls(family, grid_param, [], list(series), np.zeros((0, 0), dtype=np.uint64), {}, {})

    @property
    def primary(self):
        return self.series[0]

    @property
    def slope(self):
        """Slope fit of the primary series (``None`` if it could not be fitted)."""
        return self.slopes.get(self.primary)

    def mean_nsee(self, series=None):
        return np.exp(self.mean_log_error[series or self.primary])

    def aggregate(self):
        """Recompute ``mean_log_error`` (log of mean NSEE) and ``slopes``."""
        x = np.log(np.asarray(self.grid_values, dtype=float))
        for name in self.series:
            values = self.nsee[name]
            with np.errstate(invalid="ignore", divide="ignore"):
                counts = np.sum(np.isfinite(values), axis=1)
                sums = np.nansum(values, axis=1)
                means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
                logs = np.log(means)
            self.mean_log_error[name] = logs
            ok = np.isfinite(logs)
            self.slopes[name] = slope_fit(zip(x[ok], logs[ok])) if np.unique(x[ok]).size >= 2 else None
        return self

    def series_label(self, name):
        return self.family if len(self.series) == 1 else f"{self.family}/{name}"

    def to_dict(self):
        def arr(a):
            return [[None if not math.isfinite(v) else float(v) for v in row] for row in np.asarray(a, dtype=float)]

        def vec(a):
            return [None if not math.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]

        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "grid_param": self.grid_param,
            "grid_values": [int(g) for g in self.grid_values],
            "series": list(self.series),
            "seeds": [[int(s) for s in row] for row in self.seeds],
            "nsee": {k: arr(v) for k, v in self.nsee.items()},
            "runtime_ms": {k: arr(v) for k, v in self.runtime_ms.items()},
            "mean_log_error": {k: vec(v) for k, v in self.mean_log_error.items()},
            "slopes": {k: (None if v is None else dataclasses.asdict(v)) for k, v in self.slopes.items()},
            "partial": self.partial,
            "errors": list(self.errors),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        from .metrics import SlopeFit

        if d.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"unsupported result schema_version {d.get('schema_version')!r}")

        def arr(a):
            return np.array([[np.nan if v is None else v for v in row] for row in a], dtype=float)

        def vec(a):
            return np.array([np.nan if v is None else v for v in a], dtype=float)

        seeds = np.array(d["seeds"], dtype=np.uint64)
        if seeds.ndim != 2:
            seeds = seeds.reshape(len(d["grid_values"]), -1)
        return cls(
            family=d["family"],
            grid_param=d["grid_param"],
            grid_values=list(d["grid_values"]),
            series=list(d["series"]),
            seeds=seeds,
            nsee={k: arr(v) for k, v in d["nsee"].items()},
            runtime_ms={k: arr(v) for k, v in d["runtime_ms"].items()},
            mean_log_error={k: vec(v) for k, v in d["mean_log_error"].items()},
            slopes={k: (None if v is None else SlopeFit(**v)) for k, v in d["slopes"].items()},
            partial=bool(d.get("partial", False)),
            errors=list(d.get("errors", [])),
            provenance=dict(d.get("provenance", {})),
        )


def _thread_count(threads=None):
    env = os.environ.get(THREADS_ENV)
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if cap < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {cap}")
    return cap if threads is None else max(1, min(int(threads), cap))


def _orth(x):
    return np.linalg.qr(x)[0]


def _series_setting(config, name):
    """(distribution, whitening mode) used by one series."""
    if name in ("svd", "phd", "baseline", "none"):
        return config.dist, config.whiten
    if name == "sample_moments":
        return config.dist, "sample"
    if name == "uniform":
        return FeatureDistribution("uniform_sqrt3"), config.whiten
    if name == "poisson":
        return FeatureDistribution("poisson_norm"), config.whiten
    if name == "correlated":
        return FeatureDistribution("correlated_gaussian", rho=config.dist.rho), config.whiten
    raise ConfigError(f"unknown series {name!r}")


def _draw(config, sizes, seed, dist, whiten_mode):
    problem_rng, sample_rng = trial_streams(seed)
    n1, n2, r, m = sizes["n1"], sizes["n2"], sizes["r"], sizes["m"]
    if config.sparse:
        truth = sample_problem(n1, n2, r, sizes["s1"], sizes["s2"], seed=problem_rng)
    else:
        truth = sample_problem(n1, n2, r, seed=problem_rng)
    samples = generate_samples(truth, config.model, dist, m, seed=sample_rng)
    if whiten_mode != "none":
        if whiten_mode == "given":
            moments = dist.moments or MomentSpec.identity(n1, n2)
        else:
            moments = estimate_moments(samples)
        samples = whiten(samples, moments)
        if dist.moments is not None:
            # whitened features see the embeddings C^T U and C^T V
            truth = EmbeddingPair(_orth(dist.moments.chol1.T @ truth.u), _orth(dist.moments.chol2.T @ truth.v))
    return truth, samples


def _svd_error(config, sizes, truth, samples):
    r = sizes["r"]
    if config.sparse:
        est = sparse_estimate(samples, sizes["s1"], sizes["s2"], r)
    else:
        est = rank_r_truncate(linear_estimate(samples).x_lin, r)
    return nsee(est, truth)


def _run_trial(config, sizes, seed):
    """NSEE and runtime (ms) of every series for one trial."""
    out = {}
    if config.family == "phd_compare":
        start = time.perf_counter()
        truth, samples = _draw(config, sizes, seed, config.dist, config.whiten)
        draw_ms = (time.perf_counter() - start) * 1e3
        start = time.perf_counter()
        out["svd"] = (_svd_error(config, sizes, truth, samples), draw_ms + (time.perf_counter() - start) * 1e3)
        start = time.perf_counter()
        res = phd_estimate(samples, 2 * sizes["r"], mode=config.phd_mode)
        out["phd"] = (phd_split_error(res, truth), draw_ms + (time.perf_counter() - start) * 1e3)
        return out
    for name in config.series_names():
        start = time.perf_counter()
        dist, whiten_mode = _series_setting(config, name)
        truth, samples = _draw(config, sizes, seed, dist, whiten_mode)
        out[name] = (_svd_error(config, sizes, truth, samples), (time.perf_counter() - start) * 1e3)
    return out


def run_experiment(config, threads=None):
    """Run every grid point and trial of ``config``; deterministic given the config."""
    wall = time.perf_counter()
    names = list(config.series_names())
    n_grid, n_trials = len(config.grid), config.trials
    values = {k: np.full((n_grid, n_trials), np.nan) for k in names}
    runtimes = {k: np.full((n_grid, n_trials), np.nan) for k in names}
    seeds = np.array(
        [[derive_seed(config.base_seed, gi, ti) for ti in range(n_trials)] for gi in range(n_grid)],
        dtype=np.uint64,
    ).reshape(n_grid, n_trials)
    workers = _thread_count(threads)
    errors, warnings = [], []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for gi, value in enumerate(config.grid):
            sizes = config.sizes_at(value)
            if sizes["m"] <= sizes["n1"] + sizes["n2"]:
                msg = f"{config.grid_param}={value}: m={sizes['m']} <= n1+n2={sizes['n1'] + sizes['n2']}"
                logger.warning("sample size below the light-tail regime: %s", msg)
                warnings.append(msg)
            try:
                trial_out = list(pool.map(lambda s: _run_trial(config, sizes, int(s)), seeds[gi]))
            except (JointDRError, np.linalg.LinAlgError) as exc:
                logger.error("grid point %s=%s aborted: %s", config.grid_param, value, exc)
                errors.append(
                    {
                        "grid_index": gi,
                        "grid_value": value,
                        "error": type(exc).__name__,
                        "message": str(exc),
                    }
                )
                continue
            for ti, per_series in enumerate(trial_out):
                for name, (err, ms) in per_series.items():
                    values[name][gi, ti] = err
                    runtimes[name][gi, ti] = ms
    provenance = {
        "config": config.to_dict(),
        "package_version": __version__,
        "seed_rule": SEED_RULE,
        "aggregation": "log of the mean NSEE over trials",
        "threads": workers,
        "wall_time_s": time.perf_counter() - wall,
        "warnings": warnings,
    }
    if config.family == "phd_compare":
        provenance["phd_metric"] = f"phd_split_error against span(blkdiag(U, V)), pHd mode {config.phd_mode}"
    if "correlated" in names or config.dist.kind == "correlated_gaussian":
        provenance["rho"] = config.dist.rho
    result = ExperimentResult(
        family=config.family,
        grid_param=config.grid_param,
        grid_values=list(config.grid),
        series=names,
        seeds=seeds,
        nsee=values,
        runtime_ms=runtimes,
        partial=bool(errors),
        errors=errors,
        provenance=provenance,
    )
    return result.aggregate()


@dataclass
class RobustnessReport:
    """Baseline vs violated settings on a shared grid and shared seeds."""

    result: ExperimentResult

    @property
    def variants(self):
        return list(self.result.series[1:])

    def gaps(self, variant):
        """Per-grid-point ``|log mean NSEE(variant) - log mean NSEE(baseline)|``."""
        return np.abs(self.result.mean_log_error[variant] - self.result.mean_log_error["baseline"])

    def max_abs_gap(self, variant):
        return float(np.nanmax(self.gaps(variant)))

    def to_dict(self):
        return {
            "grid_values": list(self.result.grid_values),
            "baseline_log_error": self.result.to_dict()["mean_log_error"]["baseline"],
            "variants": {
                v: {
                    "log_error": self.result.to_dict()["mean_log_error"][v],
                    "max_abs_gap": self.max_abs_gap(v),
                }
                for v in self.variants
            },
        }


def run_robustness(config, threads=None):
    """Run a robustness config: the baseline and each listed violated variant."""
    if config.family != "robustness":
        raise ConfigError(f"run_robustness needs family 'robustness', got {config.family!r}")
    return RobustnessReport(run_experiment(config, threads=threads))


def _fmt(v):
    return "nan" if not math.isfinite(v) else repr(float(v))


def emit(result, path, format="csv"):
    """Write ``result`` as CSV (one row per trial and series) or JSON."""
    path = Path(path)
    try:
        if format == "json":
            path.write_text(json.dumps(result.to_dict(), indent=2))
            return path
        if format != "csv":
            raise InputError(f"unknown format {format!r}; expected 'csv' or 'json'")
        lines = [",".join(CSV_COLUMNS)]
        for name in result.series:
            label = result.series_label(name)
            values = result.nsee.get(name, np.zeros((0, 0)))
            runtimes = result.runtime_ms.get(name, np.zeros((0, 0)))
            for gi, grid_value in enumerate(result.grid_values):
                for ti in range(values.shape[1]):
                    lines.append(
                        ",".join(
                            [
                                label,
                                result.grid_param,
                                str(int(grid_value)),
                                str(ti),
                                str(int(result.seeds[gi, ti])),
                                _fmt(values[gi, ti]),
                                f"{runtimes[gi, ti]:.3f}",
                            ]
                        )
                    )
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path


def load_result(path):
    try:
        return ExperimentResult.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read result {path}: {exc}") from exc
