"""Loss-gradient oracles, covariate designs and synthetic data streams."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

__all__ = [
    "Model",
    "DesignKind",
    "CovariateDesign",
    "LinearOracle",
    "LadOracle",
    "LogisticOracle",
    "MeanOracle",
    "make_oracle",
    "grad_linear",
    "grad_lad",
    "grad_logistic",
    "gen_design",
    "sample_covariates",
    "true_sigma",
    "default_beta_star",
    "SyntheticStream",
    "StackedStream",
    "gen_stream",
    "laplace_from_uniform",
    "logistic_mle",
]


class Model(str, enum.Enum):
    LINEAR = "linear"
    LAD = "lad"
    LOGISTIC = "logistic"
    MEAN = "mean"


class DesignKind(str, enum.Enum):
    IDENTITY = "identity"
    TOEPLITZ = "toeplitz"
    EQUICORR = "equicorr"


# -- gradients -----------------------------------------------------------

def grad_linear(theta, x, y):
    """Gradient of ``(y - x^T theta)^2 / 2``."""
    r = y - np.sum(x * theta, axis=-1)
    return -r[..., None] * x


def grad_lad(theta, x, y):
    """Subgradient of ``|y - x^T theta|``, taking ``sign(0) = 0``."""
    r = y - np.sum(x * theta, axis=-1)
    return -np.sign(r)[..., None] * x


def grad_logistic(theta, x, y):
    """Gradient of the Bernoulli negative log-likelihood with logit link."""
    p = expit(np.sum(x * theta, axis=-1))
    return (p - y)[..., None] * x


class _Oracle:
    def __init__(self, dimension: int):
        self.dimension = int(dimension)


class LinearOracle(_Oracle):
    gradient = staticmethod(grad_linear)

    @staticmethod
    def loss(theta, x, y):
        return 0.5 * (y - np.sum(x * theta, axis=-1)) ** 2


class LadOracle(_Oracle):
    gradient = staticmethod(grad_lad)

    @staticmethod
    def loss(theta, x, y):
        return np.abs(y - np.sum(x * theta, axis=-1))


class LogisticOracle(_Oracle):
    gradient = staticmethod(grad_logistic)

    @staticmethod
    def loss(theta, x, y):
        eta = np.sum(x * theta, axis=-1)
        return -(y * log_expit(eta) + (1 - y) * log_expit(-eta))


class MeanOracle(_Oracle):
    """Mean model ``y = theta* + eps``; ``x`` is ignored (``gradient = theta - y``)."""

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)

    def gradient(self, theta, x, y):
        return theta - np.asarray(y)[..., None]

    @staticmethod
    def loss(theta, x, y):
        return 0.5 * np.sum((np.asarray(y)[..., None] - theta) ** 2, axis=-1)


def make_oracle(model, d: int):
    model = Model(model)
    if model is Model.MEAN:
        return MeanOracle(d)
    return {Model.LINEAR: LinearOracle, Model.LAD: LadOracle, Model.LOGISTIC: LogisticOracle}[model](d)


# -- designs -------------------------------------------------------------

@dataclass(frozen=True)
class CovariateDesign:
    kind: DesignKind
    d: int
    rho: float
    matrix: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)


def _design_matrix(kind: DesignKind, d: int, rho: float) -> np.ndarray:
    if kind is DesignKind.IDENTITY:
        return np.eye(d)
    if kind is DesignKind.TOEPLITZ:
        idx = np.arange(d)
        return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    a = np.full((d, d), float(rho))
    np.fill_diagonal(a, 1.0)
    return a


def gen_design(kind, d: int, rho: float = 0.0) -> CovariateDesign:
    """Covariance ``A`` of the covariates with its Cholesky factor cached."""
    kind = DesignKind(kind)
    if d < 1:
        raise ValueError("d must be positive")
    if kind is not DesignKind.IDENTITY and not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    a = _design_matrix(kind, d, rho)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"design matrix for {kind.value} with rho={rho} is not positive definite") from err
    return CovariateDesign(kind, d, float(rho), a, chol)


def sample_covariates(design: CovariateDesign, rng, size=()) -> np.ndarray:
    """Draws of ``N(0, A)`` with shape ``size + (d,)``."""
    size = (size,) if np.ndim(size) == 0 and size != () else tuple(size)
    z = rng.standard_normal(size + (design.d,))
    return z @ design.chol.T


def true_sigma(kind, d: int, rho: float = 0.0) -> np.ndarray:
    """``A^{-1}``, the asymptotic covariance for the linear and LAD models."""
    kind = DesignKind(kind)
    if kind is DesignKind.IDENTITY:
        return np.eye(d)
    if kind is DesignKind.EQUICORR:
        return (np.eye(d) - rho / (1 + (d - 1) * rho) * np.ones((d, d))) / (1 - rho)
    a = _design_matrix(kind, d, rho)
    return np.linalg.solve(a, np.eye(d))


def default_beta_star(d: int) -> np.ndarray:
    """Equidistant interior points ``k / (d + 1)`` of ``(0, 1)``."""
    return np.arange(1, d + 1, dtype=np.float64) / (d + 1)


def laplace_from_uniform(u):
    """Inverse CDF of the standard Laplace law (density ``exp(-|e|) / 2``) at ``u`` in (0, 1)."""
    u = np.asarray(u) - 0.5
    return -np.sign(u) * np.log1p(-2.0 * np.abs(u))


# -- streams -------------------------------------------------------------

class SyntheticStream:
    """Unbounded iid data for one chain.

    LINEAR: ``y = x^T beta + N(0, 1)``; LAD: ``y = x^T beta + Laplace(0, 1)``;
    LOGISTIC: ``y ~ Bernoulli(expit(x^T beta))``; MEAN: ``y = theta* + N(0, 1)``.
    With ``intercept`` set, the first covariate is the constant 1 and
    ``beta[0]`` is the intercept; the remaining ``d - 1`` follow the design.
    """

    def __init__(self, model, design: CovariateDesign | None, beta_star, seed=None,
                 intercept: bool = False, limit: int | None = None):
        self.model = Model(model)
        self.design = design
        self.beta = np.asarray(beta_star, dtype=np.float64)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.intercept = intercept
        self.limit = limit
        self.block = 4096
        self.emitted = 0
        self._x = np.empty((0, 1))
        self._y = np.empty(0)
        self._pos = 0
        if self.model is not Model.MEAN:
            k = design.d + (1 if intercept else 0)
            if self.beta.shape != (k,):
                raise ValueError(f"beta_star must have length {k}")

    @property
    def dimension(self) -> int:
        return len(self.beta)

    def _block(self, m: int):
        rng = self.rng
        if self.model is Model.MEAN:
            y = self.beta[0] + rng.standard_normal(m)
            return np.ones((m, 1)), y
        x = sample_covariates(self.design, rng, m)
        if self.intercept:
            x = np.concatenate([np.ones((m, 1)), x], axis=1)
        eta = x @ self.beta
        if self.model is Model.LINEAR:
            y = eta + rng.standard_normal(m)
        elif self.model is Model.LAD:
            y = eta + laplace_from_uniform(rng.random(m))
        else:
            y = (rng.random(m) < expit(eta)).astype(np.float64)
        return x, y

    def take(self, m: int):
        # data are drawn in fixed blocks so the sequence never depends on how it is read
        if self.limit is not None:
            m = max(min(m, self.limit - self.emitted), 0)
        xs, ys = [], []
        need = m
        while need > 0:
            if self._pos == len(self._y):
                self._x, self._y = self._block(self.block)
                self._pos = 0
            k = min(need, len(self._y) - self._pos)
            xs.append(self._x[self._pos : self._pos + k])
            ys.append(self._y[self._pos : self._pos + k])
            self._pos += k
            need -= k
        self.emitted += m
        if not ys:
            return np.empty((0, self.dimension)), np.empty(0)
        if len(ys) == 1:
            return xs[0], ys[0]
        return np.concatenate(xs), np.concatenate(ys)


class StackedStream:
    """Several independent streams read in lock step: ``x`` is ``(m, R, d)``."""

    def __init__(self, streams):
        self.streams = list(streams)

    def take(self, m: int):
        parts = [s.take(m) for s in self.streams]
        k = min(len(p[1]) for p in parts)
        x = np.stack([p[0][:k] for p in parts], axis=1)
        y = np.stack([p[1][:k] for p in parts], axis=1)
        return x, y


def gen_stream(model, design, beta_star=None, seed=None, **kw) -> SyntheticStream:
    model = Model(model)
    if beta_star is None:
        if model is Model.MEAN:
            beta_star = np.zeros(1)
        else:
            beta_star = default_beta_star(design.d)
    return SyntheticStream(model, design, beta_star, seed, **kw)


def logistic_mle(x, y, max_iter: int = 100, tol: float = 1e-8, ridge: float = 0.0) -> np.ndarray:
    """Damped Newton solve of the logistic-regression likelihood equations."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.all(y == y[0]):
        raise ValueError("logistic fit needs both classes in the data")
    n, d = x.shape
    beta = np.zeros(d)

    def nll(b):
        eta = x @ b
        return -(y * log_expit(eta) + (1 - y) * log_expit(-eta)).sum() / n + 0.5 * ridge * b @ b

    f = nll(beta)
    for _ in range(max_iter):
        p = expit(x @ beta)
        g = x.T @ (p - y) / n + ridge * beta
        if np.max(np.abs(g)) <= tol:
            break
        w = p * (1 - p)
        h = (x * w[:, None]).T @ x / n + ridge * np.eye(d)
        step = np.linalg.solve(h + 1e-12 * np.eye(d), g)
        t = 1.0
        while t > 1e-10:
            cand = beta - t * step
            fc = nll(cand)
            if fc <= f:
                beta, f = cand, fc
                break
            t *= 0.5
        else:
            break
    return beta
