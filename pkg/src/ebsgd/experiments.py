"""Replication harness: seeded Monte Carlo studies of the covariance estimators.

Each replication ``r`` draws its data from ``SeedSequence(seed, spawn_key=(r,))``
so results do not depend on how replications are grouped or scheduled.
Replications are simulated in fixed-size groups of stacked chains; groups
may be spread over worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import __version__
from .batching import BatchMeans, EbsTracker, IbsTracker, ebs_batch_size, ibs_boundaries
from .covariance import (
    CovEstimate,
    Kind,
    ebs_estimate,
    ibs_estimate,
    lugsail_estimate,
    psd_project,
)
from .models import (
    DesignKind,
    Model,
    StackedStream,
    default_beta_star,
    gen_design,
    gen_stream,
    logistic_mle,
    make_oracle,
    true_sigma,
)
from .regions import (
    bonferroni_region,
    classify_conservative,
    classify_plain,
    ellipsoid_region,
    marginal_cis,
    normal_quantile,
    predict_prob_interval,
    simultaneous_region,
    simultaneous_z,
    volume_ratio,
)
from .sgd import ArrayStream, LearningRateSchedule, run_asgd

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MetricsRow",
    "Stat",
    "METRICS",
    "rel_frobenius",
    "run_replications",
    "rows_to_csv",
    "write_outputs",
    "config_hash",
    "replication_seed",
    "BiasOracle",
    "mean_model_bias_oracle",
    "naive_bias_sum",
    "qq_data",
    "ClassificationConfig",
    "classification_experiment",
    "synthetic_classification_data",
]

METRICS = (
    "rel_frobenius",
    "bias_trace",
    "ellipsoid_coverage",
    "rect_coverage",
    "marginal_coverage",
    "bonferroni_coverage",
    "volume_ratio",
    "z_star",
    "min_eigenvalue",
    "indefinite_fraction",
)
_ESTIMATOR_ORDER = (Kind.EBS, Kind.LUGSAIL, Kind.IBS, Kind.TRUE)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def replication_seed(seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(rep,))


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one replication study.

    ``beta`` defaults to ``(1 + alpha) / 2`` and ``checkpoints`` to
    ``(n_max,)``. ``group_size`` chains are simulated together; it affects
    speed only. ``intercept`` (logistic model) prepends a constant covariate
    with that coefficient.
    """

    model: str = "linear"
    design: str = "identity"
    d: int = 5
    rho: float = 0.0
    eta0: float = 0.5
    alpha: float = 0.51
    beta: float | None = None
    c: float = 0.1
    burn_in: int = 0
    n_max: int = 100_000
    checkpoints: tuple = ()
    replications: int = 10
    seed: int = 0
    estimators: tuple = ("EBS", "LUGSAIL", "IBS")
    p: float = 0.05
    ibs_scale: float = 64.0
    include_true: bool = True
    intercept: float | None = None
    group_size: int = 50

    def __post_init__(self):
        def fail(msg):
            raise ConfigError(msg)

        try:
            model = Model(self.model)
            DesignKind(self.design)
        except ValueError as err:
            fail(str(err))
        if not 0.5 < self.alpha < 1:
            fail(f"alpha must lie in (0.5, 1), got {self.alpha}")
        beta = (1 + self.alpha) / 2 if self.beta is None else float(self.beta)
        if not self.alpha < beta < 1:
            fail(f"beta must lie in (alpha, 1) = ({self.alpha}, 1), got {beta}")
        object.__setattr__(self, "beta", beta)
        if self.c <= 0 or self.eta0 <= 0:
            fail("c and eta0 must be positive")
        if self.d < 1:
            fail("d must be positive")
        if model is Model.MEAN and self.d != 1:
            fail("the mean model is one-dimensional (d = 1)")
        if self.intercept is not None and model is not Model.LOGISTIC:
            fail("intercept applies to the logistic model only")
        if self.replications < 1 or self.group_size < 1 or self.burn_in < 0:
            fail("replications and group_size must be positive, burn_in nonnegative")
        if not 0 < self.p < 1:
            fail(f"p must lie in (0, 1), got {self.p}")
        cps = tuple(int(n) for n in (self.checkpoints or (self.n_max,)))
        if any(b <= a for a, b in zip(cps, cps[1:])):
            fail(f"checkpoints must be strictly increasing, got {cps}")
        if cps[0] < 1 or cps[-1] > self.n_max:
            fail(f"checkpoints must lie in [1, n_max={self.n_max}]")
        object.__setattr__(self, "checkpoints", cps)
        ests = tuple(str(e).upper() for e in self.estimators)
        for e in ests:
            if e not in ("EBS", "LUGSAIL", "IBS"):
                fail(f"unknown estimator {e!r}; choose from EBS, LUGSAIL, IBS")
        object.__setattr__(self, "estimators", ests)

    @property
    def dimension(self) -> int:
        return self.d + (1 if self.intercept is not None else 0)

    def theta_star(self) -> np.ndarray:
        if Model(self.model) is Model.MEAN:
            return np.zeros(1)
        grid = default_beta_star(self.d)
        if self.intercept is not None:
            return np.concatenate([[float(self.intercept)], grid])
        return grid

    def sigma_true(self) -> np.ndarray | None:
        """Known asymptotic covariance, or None when it has no closed form."""
        model = Model(self.model)
        if model is Model.MEAN:
            return np.eye(1)
        if model is Model.LOGISTIC:
            return None
        return true_sigma(self.design, self.d, self.rho)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["checkpoints"] = list(self.checkpoints)
        out["estimators"] = list(self.estimators)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = dict(obj)
        for key in ("checkpoints", "estimators"):
            if key in kw and isinstance(kw[key], str):
                kw[key] = [s for s in kw[key].replace(",", " ").split() if s]
            if key in kw:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as err:
            raise ConfigError(str(err)) from err


def config_hash(config: ExperimentConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def rel_frobenius(sigma_hat, sigma_true) -> np.ndarray | float:
    """``||sigma_hat - sigma_true||_F / ||sigma_true||_F`` (broadcasts over leading axes)."""
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    sigma_true = np.asarray(sigma_true, dtype=np.float64)
    if sigma_hat.shape[-2:] != sigma_true.shape[-2:]:
        raise ValueError(f"shape mismatch: {sigma_hat.shape} vs {sigma_true.shape}")
    ref = np.linalg.norm(sigma_true, axis=(-2, -1))
    if np.any(ref == 0):
        raise ValueError("true covariance has zero norm")
    out = np.linalg.norm(sigma_hat - sigma_true, axis=(-2, -1)) / ref
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Stat:
    mean: float
    se: float
    count: int


@dataclass
class MetricsRow:
    """Aggregated metrics of one estimator at one checkpoint.

    ``stats`` maps metric names (see ``METRICS``) to their Monte Carlo mean,
    standard error (population SD over replications / sqrt(R)) and count.
    ``note`` carries the reason when the cell is absent.
    """

    n: int
    estimator: str
    stats: dict = field(default_factory=dict)
    note: str = ""

    @property
    def absent(self) -> bool:
        return not self.stats

    def __getitem__(self, metric: str) -> Stat:
        return self.stats[metric]

    def get(self, metric: str):
        return self.stats.get(metric)


class _Trackers:
    """Pushes each iterate to several trackers at once."""

    def __init__(self, trackers):
        self.trackers = [t for t in trackers if t is not None]
        self.n_seen = 0

    def push(self, theta):
        for t in self.trackers:
            t.push(theta)
        self.n_seen += 1


def _mvn_seed(config: ExperimentConfig) -> int:
    return int(np.random.SeedSequence(config.seed).generate_state(1)[0])


def _estimates(config, ebs, ibs):
    out = {}
    for name in config.estimators:
        kind = Kind(name)
        try:
            if kind is Kind.IBS:
                means, sizes = ibs.finalize()
                out[kind] = ibs_estimate(means, sizes)
            else:
                bm = ebs.finalize()
                out[kind] = ebs_estimate(bm) if kind is Kind.EBS else lugsail_estimate(bm)
        except ValueError as err:
            out[kind] = str(err)
    return out


def _region_metrics(theta_hat, sigma, n, theta_star, p, seed, zcache=None):
    ell = ellipsoid_region(theta_hat, sigma, n, p)
    if zcache is not None and "z" in zcache:
        zs = zcache["z"]
    else:
        zs = simultaneous_z(sigma, p, seed=seed)
        if zcache is not None:
            zcache["z"] = zs
    rect = simultaneous_region(theta_hat, sigma, n, p, zstar=zs)
    return {
        "ellipsoid_coverage": float(ell.contains(theta_star)),
        "rect_coverage": float(rect.contains(theta_star)),
        "marginal_coverage": float(marginal_cis(theta_hat, sigma, n, p).contains(theta_star)),
        "bonferroni_coverage": float(bonferroni_region(theta_hat, sigma, n, p).contains(theta_star)),
        "volume_ratio": volume_ratio(rect, ell),
        "z_star": zs.z,
    }


def _run_group(config: ExperimentConfig, reps) -> dict:
    """Simulate replications ``reps`` together; return per-replication values.

    The result maps ``(n, kind)`` to either ``{metric: array}`` or an
    absence reason string.
    """
    reps = list(reps)
    R = len(reps)
    d = config.dimension
    model = Model(config.model)
    design = None if model is Model.MEAN else gen_design(config.design, config.d, config.rho)
    theta_star = config.theta_star()
    sigma_true = config.sigma_true()
    streams = [
        gen_stream(model, design, theta_star, seed=np.random.default_rng(replication_seed(config.seed, r)),
                   intercept=config.intercept is not None)
        for r in reps
    ]
    stream = StackedStream(streams)
    oracle = make_oracle(model, d)
    schedule = LearningRateSchedule(config.eta0, config.alpha)
    need_ebs = any(e in ("EBS", "LUGSAIL") for e in config.estimators)
    need_ibs = "IBS" in config.estimators
    ebs = EbsTracker(config.c, config.beta, d, (R,)) if need_ebs else None
    ibs = None
    if need_ibs:
        ibs = IbsTracker(ibs_boundaries(config.n_max, config.alpha, config.ibs_scale, min_batches=d + 1), d, (R,))
    tracker = _Trackers([ebs, ibs])
    mvn_seed = _mvn_seed(config)
    state = None
    prev = 0
    out = {}
    true_cache = {}
    for n in config.checkpoints:
        theta_hat, tracker, state = run_asgd(
            oracle, stream, schedule, np.zeros((R, d)), config.burn_in, n - prev,
            tracker=tracker, state=state,
        )
        prev = n
        ests = _estimates(config, ebs, ibs)
        if config.include_true and sigma_true is not None:
            ests[Kind.TRUE] = CovEstimate(np.broadcast_to(sigma_true, (R, d, d)), Kind.TRUE, 0, 0, n)
        for kind, est in ests.items():
            if isinstance(est, str):
                out[(n, kind)] = est
                continue
            vals = {m: np.full(R, np.nan) for m in METRICS}
            mats = np.asarray(est.matrix)
            if sigma_true is not None:
                vals["rel_frobenius"] = rel_frobenius(mats, sigma_true)
                vals["bias_trace"] = np.trace(mats - sigma_true, axis1=-2, axis2=-1) / d
            mins = np.linalg.eigvalsh(mats)[:, 0]
            vals["min_eigenvalue"] = mins
            vals["indefinite_fraction"] = (mins < 0).astype(np.float64)
            cache = true_cache.setdefault(n, {}) if kind is Kind.TRUE else None
            for i in range(R):
                sigma = mats[i]
                if kind is not Kind.TRUE:
                    sigma = psd_project(CovEstimate(sigma, kind, est.batch_size, est.n_batches, n)).matrix
                rm = _region_metrics(theta_hat[i], sigma, n, theta_star, config.p, mvn_seed, cache)
                for key, v in rm.items():
                    vals[key][i] = v
            if sigma_true is None:
                del vals["rel_frobenius"], vals["bias_trace"]
            out[(n, kind)] = vals
    return out


def _groups(config: ExperimentConfig):
    R, g = config.replications, config.group_size
    return [range(i, min(i + g, R)) for i in range(0, R, g)]


def _workers(workers) -> int:
    if workers is None:
        env = os.environ.get("EBSGD_WORKERS", "1")
        try:
            workers = int(env)
        except ValueError as err:
            raise ConfigError(f"EBSGD_WORKERS must be an integer, got {env!r}") from err
    return max(int(workers), 1)


def run_replications(config: ExperimentConfig, workers: int | None = None, raw: bool = False):
    """Run every replication and aggregate metrics per (checkpoint, estimator).

    ``workers`` defaults to the ``EBSGD_WORKERS`` environment variable (1).
    With ``raw`` set, the per-replication values are returned as well.
    """
    groups = _groups(config)
    workers = _workers(workers)
    if workers > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(groups))) as pool:
            parts = list(pool.map(_run_group, [config] * len(groups), groups))
    else:
        parts = [_run_group(config, g) for g in groups]

    kinds = [k for k in _ESTIMATOR_ORDER if (parts[0].get((config.checkpoints[0], k)) is not None)]
    rows, per_rep = [], {}
    for n in config.checkpoints:
        for kind in kinds:
            cells = [part[(n, kind)] for part in parts]
            if isinstance(cells[0], str):
                rows.append(MetricsRow(n, kind.value, {}, f"ABSENT: {cells[0]}"))
                continue
            stats = {}
            for metric in METRICS:
                if metric not in cells[0]:
                    continue
                v = np.concatenate([c[metric] for c in cells])
                per_rep[(n, kind.value, metric)] = v
                stats[metric] = Stat(float(v.mean()), float(v.std() / math.sqrt(len(v))), len(v))
            rows.append(MetricsRow(n, kind.value, stats))
    return (rows, per_rep) if raw else rows


CSV_COLUMNS = ("n", "estimator", "metric", "mean", "se", "count", "note")


def _fmt(x: float) -> str:
    return repr(float(x))


def rows_to_csv(rows) -> str:
    """Long-form CSV, one line per (n, estimator, metric)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        if row.absent:
            w.writerow([row.n, row.estimator, "", "", "", 0, row.note])
            continue
        for metric in METRICS:
            s = row.stats.get(metric)
            if s is not None:
                w.writerow([row.n, row.estimator, metric, _fmt(s.mean), _fmt(s.se), s.count, row.note])
    return buf.getvalue()


def write_outputs(rows, config: ExperimentConfig, out_path) -> tuple[str, str]:
    """Write the metrics CSV and a JSON manifest next to it; return both paths."""
    out_path = os.fspath(out_path)
    base = out_path[:-4] if out_path.endswith(".csv") else out_path
    csv_path = base + ".csv"
    manifest_path = base + ".manifest.json"
    text = rows_to_csv(rows)
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    manifest = {
        "tool": "ebsgd",
        "version": __version__,
        "config": config.to_dict(),
        "config_sha256": config_hash(config),
        "metrics_csv": os.path.basename(csv_path),
        "metrics_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "columns": list(CSV_COLUMNS),
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, manifest_path


# -- mean-model bias oracle ----------------------------------------------

@dataclass(frozen=True)
class BiasOracle:
    n: int
    batch_size: int
    n_batches: int
    ebs: float
    lugsail: float


def _cross_sum(b: int, a: int, alpha: float) -> float:
    """``sum_{j<k} sum_{p in j} sum_{q in k} q^-a (1 - q^-a)^(q - p)`` in O(a b).

    For ``q`` in batch ``k`` the sum over every earlier ``p`` is geometric:
    ``q^-a sum_{p=1}^{t} r^(q-p) = r^(q-t) (1 - r^t)`` with ``r = 1 - q^-a``
    and ``t`` the end of batch ``k - 1``.
    """
    if a < 2:
        return 0.0
    q = np.arange(b + 1, a * b + 1, dtype=np.float64)
    t = np.floor((q - 1) / b) * b
    log_r = np.log1p(-(q ** -alpha))
    return float(np.sum(np.exp((q - t) * log_r) * -np.expm1(t * log_r)))


def naive_bias_sum(b: int, a: int, alpha: float) -> float:
    """Literal triple sum of the cross-batch covariances (slow; for checking)."""
    total = 0.0
    for k in range(2, a + 1):
        for q in range((k - 1) * b + 1, k * b + 1):
            w = q ** -alpha
            for j in range(1, k):
                for p in range((j - 1) * b + 1, j * b + 1):
                    total += w * (1 - w) ** (q - p)
    return total


def _bias(b, a, alpha, C1, sigma):
    if a < 1:
        return 0.0
    val = -2.0 * C1 / (a * b) * _cross_sum(b, a, alpha)
    if sigma is not None and a >= 2:
        val -= sigma / a
    return val


def mean_model_bias_oracle(n: int, alpha: float, c: float = 0.1, beta: float | None = None,
                           C1: float = 1.0, sigma: float | None = None) -> BiasOracle:
    """Leading-order bias of the EBS and lugsail estimators on the mean model.

    Iterate covariances are modelled as ``C1 q^-alpha (1 - q^-alpha)^(q-p)``;
    only the cross-batch terms enter, scaled by ``-2 C1 / n`` with ``n`` the
    iterates covered by whole batches. Passing ``sigma`` (the true variance)
    adds the ``-sigma / a`` term that centering at the average batch mean
    contributes, which is not negligible when there are few batches.
    """
    if not 0.5 < alpha < 1:
        raise ValueError(f"alpha must lie in (0.5, 1), got {alpha}")
    beta = (1 + alpha) / 2 if beta is None else beta
    b = ebs_batch_size(n, c, beta)
    a = n // b
    small = _bias(b, a, alpha, C1, sigma)
    big = _bias(2 * b, n // (2 * b), alpha, C1, sigma)
    return BiasOracle(int(n), b, a, small, 2 * big - small)


# -- QQ diagnostics ------------------------------------------------------

def qq_data(bm: BatchMeans, theta_star=None) -> np.ndarray:
    """Pooled standardized batch-mean components against normal quantiles.

    Returns an ``(a d, 2)`` array of ``(empirical, theoretical)`` pairs sorted
    by the empirical value.
    """
    if bm.count < 2:
        raise ValueError(f"insufficient batches: QQ data need >= 2, got {bm.count}")
    means = np.asarray(bm.means, dtype=np.float64)
    if means.ndim != 2:
        raise ValueError("QQ data are computed for a single chain")
    center = bm.center if theta_star is None else np.asarray(theta_star, dtype=np.float64)
    z = (math.sqrt(bm.batch_size) * (means - center)).ravel()
    sd = z.std()
    if not sd > 0:
        raise ValueError("batch means have zero spread; QQ data are undefined")
    emp = np.sort(z / sd)
    m = len(emp)
    theo = ndtri((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([emp, theo])


# -- classification ------------------------------------------------------

@dataclass(frozen=True)
class ClassificationConfig:
    """ASGD settings for a logistic fit with a maximum-likelihood warm start.

    The first ``warm_start`` training rows give the starting point; the rest
    feed SGD, of which the first ``burn_in`` steps are not averaged.
    """

    eta0: float = 0.05
    alpha: float = 0.51
    c: float = 0.1
    beta: float | None = None
    warm_start: int = 10_000
    burn_in: int = 5_000
    level: float = 0.95

    def __post_init__(self):
        if not 0.5 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0.5, 1), got {self.alpha}")
        beta = (1 + self.alpha) / 2 if self.beta is None else float(self.beta)
        if not self.alpha < beta < 1:
            raise ConfigError(f"beta must lie in (alpha, 1), got {beta}")
        object.__setattr__(self, "beta", beta)
        if self.warm_start < 0 or self.burn_in < 0:
            raise ConfigError("warm_start and burn_in must be nonnegative")


@dataclass(frozen=True)
class ClassificationResult:
    cutoffs: np.ndarray
    plain: np.ndarray
    conservative: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: CovEstimate
    n: int

    def table(self) -> list[dict]:
        return [
            {"q": float(q), "plain": float(a), "conservative": float(b)}
            for q, a, b in zip(self.cutoffs, self.plain, self.conservative)
        ]


def _error_rates(p_hat, se, y, cutoffs, z):
    plain, cons = [], []
    for q in cutoffs:
        plain.append(np.mean(classify_plain(p_hat, q) != y))
        cons.append(np.mean(classify_conservative(p_hat, se, q, z) != y))
    return np.array(plain), np.array(cons)


def classification_experiment(train, test, config: ClassificationConfig | None = None,
                              cutoffs=(0.5,), sigma_override=None) -> ClassificationResult:
    """Fit logistic regression by ASGD and compare two thresholding rules.

    ``train`` and ``test`` are ``(x, y)`` pairs. The plain rule predicts 1
    when ``p_hat > q``; the conservative one when ``p_hat - z se > q`` with
    the delta-method ``se`` from the lugsail estimate. ``sigma_override``
    replaces that estimate (e.g. to check the zero-variance case).
    """
    config = config or ClassificationConfig()
    x, y = (np.asarray(v, dtype=np.float64) for v in train)
    x_test, y_test = (np.asarray(v, dtype=np.float64) for v in test)
    for arr in (y, y_test):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("responses must be binary 0/1")
    if np.all(y == y[0]):
        raise ValueError("training data contain a single class")
    w = config.warm_start
    n_sgd = len(y) - w - config.burn_in
    if n_sgd < 4:
        raise ValueError(f"training set too small: {len(y)} rows for warm start {w} and burn-in {config.burn_in}")
    theta0 = logistic_mle(x[:w], y[:w]) if w > 0 else np.zeros(x.shape[1])
    tracker = EbsTracker(config.c, config.beta, x.shape[1])
    oracle = make_oracle(Model.LOGISTIC, x.shape[1])
    theta_hat, tracker, _ = run_asgd(
        oracle, ArrayStream(x[w:], y[w:]), LearningRateSchedule(config.eta0, config.alpha),
        theta0, config.burn_in, n_sgd, tracker=tracker,
    )
    if sigma_override is None:
        sigma = lugsail_estimate(tracker.finalize())
    else:
        sigma = CovEstimate(np.asarray(sigma_override, dtype=np.float64), Kind.LUGSAIL, 0, 0, n_sgd)
    usable = psd_project(sigma) if sigma_override is None else sigma
    pi = predict_prob_interval(x_test, theta_hat, usable.matrix, n_sgd, config.level)
    cutoffs = np.asarray(cutoffs, dtype=np.float64)
    z = normal_quantile(0.5 + config.level / 2)
    plain, cons = _error_rates(pi.p_hat, pi.se, y_test, cutoffs, z)
    return ClassificationResult(cutoffs, plain, cons, theta_hat, sigma, n_sgd)


def synthetic_classification_data(seed, d: int = 10, n_train: int = 50_000, n_test: int = 10_000,
                                  intercept: float = -3.0, rho: float = 0.0):
    """Logistic data with an intercept and ``d - 1`` Gaussian covariates.

    The slopes are the interior grid ``k / d``; the default intercept makes
    roughly one response in ten a success. Returns ``(train, test, beta)``.
    """
    design = gen_design(DesignKind.IDENTITY if rho == 0 else DesignKind.TOEPLITZ, d - 1, rho)
    beta = np.concatenate([[intercept], default_beta_star(d - 1)])
    rng = np.random.default_rng(seed)
    stream = gen_stream(Model.LOGISTIC, design, beta, seed=rng, intercept=True)
    x, y = stream.take(n_train + n_test)
    return (x[:n_train], y[:n_train]), (x[n_train:], y[n_train:]), beta
