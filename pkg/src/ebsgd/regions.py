"""Confidence regions and prediction intervals from ``(theta_hat, Sigma_hat, n)``.

Regions follow the normal approximation ``theta_hat ~ N(theta*, Sigma / n)``:
the chi-square ellipsoid, per-coordinate intervals with the uncorrected and
Bonferroni critical values, and the simultaneous rectangle whose common
critical value ``z*`` gives joint probability ``1 - p``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln, ndtri
from scipy.optimize import brentq
from scipy.stats import chi2

from .covariance import CovEstimate
from .mvn import mvn_rect_prob

__all__ = [
    "SingularCovarianceError",
    "RectKind",
    "EllipsoidRegion",
    "RectRegion",
    "ZStar",
    "PredictionInterval",
    "ellipsoid_region",
    "marginal_cis",
    "bonferroni_region",
    "simultaneous_z",
    "simultaneous_region",
    "volume_ratio",
    "predict_prob_interval",
    "classify_plain",
    "classify_conservative",
    "normal_quantile",
]


class SingularCovarianceError(ValueError):
    pass


class RectKind(str, enum.Enum):
    UNCORRECTED = "UNCORRECTED"
    BONFERRONI = "BONFERRONI"
    SIMULTANEOUS = "SIMULTANEOUS"


def normal_quantile(q: float) -> float:
    return float(ndtri(q))


def _matrix(sigma) -> np.ndarray:
    if isinstance(sigma, CovEstimate):
        sigma = sigma.matrix
    m = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_level(p):
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")


@dataclass(frozen=True)
class EllipsoidRegion:
    """``{theta : (theta_hat - theta)^T Sigma^{-1} (theta_hat - theta) <= chi2 / n}``."""

    center: np.ndarray
    sigma: np.ndarray
    n: int
    chi2_quantile: float
    level: float

    @property
    def threshold(self) -> float:
        return self.chi2_quantile / self.n

    @property
    def shape(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)

    def distance2(self, theta) -> np.ndarray:
        diff = np.asarray(theta, dtype=np.float64) - self.center
        sol = np.linalg.solve(self.sigma, diff[..., None])[..., 0]
        return np.sum(diff * sol, axis=-1)

    def contains(self, theta):
        return self.distance2(theta) <= self.threshold

    def log_volume(self) -> float:
        d = len(self.center)
        _, logdet = np.linalg.slogdet(self.sigma / self.n)
        return (0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1)
                + 0.5 * d * math.log(self.chi2_quantile) + 0.5 * logdet)

    def volume(self) -> float:
        return math.exp(self.log_volume())

    def to_dict(self) -> dict:
        return {
            "kind": "ELLIPSOID",
            "level": self.level,
            "center": self.center.tolist(),
            "shape": self.shape.tolist(),
            "chi2": self.chi2_quantile,
            "threshold": self.threshold,
            "n": int(self.n),
        }


@dataclass(frozen=True)
class RectRegion:
    center: np.ndarray
    halfwidths: np.ndarray
    z: float
    kind: RectKind
    level: float
    probability: float | None = None
    stderr: float | None = None

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.halfwidths

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.halfwidths

    def contains(self, theta):
        diff = np.abs(np.asarray(theta, dtype=np.float64) - self.center)
        return np.all(diff <= self.halfwidths, axis=-1)

    def log_volume(self) -> float:
        return float(np.sum(np.log(2.0 * self.halfwidths)))

    def volume(self) -> float:
        return math.exp(self.log_volume())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "level": self.level,
            "center": self.center.tolist(),
            "halfwidths": self.halfwidths.tolist(),
            "z": self.z,
            "probability": self.probability,
            "stderr": self.stderr,
        }


def ellipsoid_region(theta_hat, sigma_hat, n: int, p: float = 0.05) -> EllipsoidRegion:
    _check_level(p)
    sigma = _matrix(sigma_hat)
    vals = np.linalg.eigvalsh(sigma)
    if not vals[0] > 1e-14 * max(abs(vals[-1]), 1e-300):
        raise SingularCovarianceError(
            f"covariance is not positive definite: smallest eigenvalue {vals[0]:.6g}"
        )
    d = sigma.shape[0]
    center = np.asarray(theta_hat, dtype=np.float64).reshape(d)
    return EllipsoidRegion(center, sigma, int(n), float(chi2.ppf(1 - p, d)), 1 - p)


def _rect(theta_hat, sigma_hat, n, z, kind, p, probability=None, stderr=None) -> RectRegion:
    sigma = _matrix(sigma_hat)
    diag = np.diag(sigma)
    if np.any(~(diag > 0)):
        raise ValueError("covariance diagonal must be positive")
    center = np.asarray(theta_hat, dtype=np.float64).reshape(len(diag))
    return RectRegion(center, z * np.sqrt(diag / n), float(z), kind, 1 - p, probability, stderr)


def marginal_cis(theta_hat, sigma_hat, n: int, p: float = 0.05) -> RectRegion:
    """Per-coordinate ``theta_hat_i +- z_{1-p/2} sqrt(sigma_ii / n)``."""
    _check_level(p)
    return _rect(theta_hat, sigma_hat, n, normal_quantile(1 - p / 2), RectKind.UNCORRECTED, p)


def bonferroni_region(theta_hat, sigma_hat, n: int, p: float = 0.05) -> RectRegion:
    _check_level(p)
    d = _matrix(sigma_hat).shape[0]
    return _rect(theta_hat, sigma_hat, n, normal_quantile(1 - p / (2 * d)), RectKind.BONFERRONI, p)


@dataclass(frozen=True)
class ZStar:
    z: float
    probability: float
    stderr: float
    lower: float
    upper: float
    hit_upper: bool = False


def simultaneous_z(
    sigma_hat,
    p: float = 0.05,
    tol: float = 1e-4,
    xtol: float = 1e-6,
    seed=0,
    accuracy: float = 5e-4,
    max_points: int = 2**13,
    n_shifts: int = 8,
) -> ZStar:
    """Common critical value with ``P(|X_i| <= z sqrt(sigma_ii) all i) = 1 - p``.

    A bracketing root search (Brent's method, which falls back to bisection)
    over ``[z_{1-p/2}, z_{1-p/(2d)}]`` stops when the probability is within
    ``tol`` of ``1 - p`` or the bracket is narrower than ``xtol``.
    The lattice size is fixed after the first evaluation so every
    evaluation uses the same quasi-random points.
    """
    _check_level(p)
    sigma = _matrix(sigma_hat)
    d = sigma.shape[0]
    lo = normal_quantile(1 - p / 2)
    hi = normal_quantile(1 - p / (2 * d))
    target = 1 - p
    if d == 1:
        return ZStar(lo, target, 0.0, lo, hi)
    first = mvn_rect_prob(sigma, hi, accuracy=accuracy, max_points=max_points,
                          n_shifts=n_shifts, seed=seed)
    npts = first.n_points

    def prob(z):
        return mvn_rect_prob(sigma, z, n_shifts=n_shifts, seed=seed, n_points=npts)

    if first.probability < target:
        warnings.warn(
            f"rectangle probability at the Bonferroni bound is {first.probability:.6f} "
            f"< {target}; returning the upper endpoint",
            RuntimeWarning,
            stacklevel=2,
        )
        return ZStar(hi, first.probability, first.stderr, lo, hi, hit_upper=True)
    r_lo = prob(lo)
    if r_lo.probability >= target:
        return ZStar(lo, r_lo.probability, r_lo.stderr, lo, hi)
    seen = {hi: first, lo: r_lo}

    class _Close(Exception):
        pass

    def gap(z):
        r = seen[z] if z in seen else prob(z)
        seen[z] = r
        if abs(r.probability - target) <= tol:
            raise _Close(z)
        return r.probability - target

    try:
        z = brentq(gap, lo, hi, xtol=xtol)
    except _Close as hit:
        z = hit.args[0]
    r = seen.get(z) or prob(z)
    return ZStar(float(z), r.probability, r.stderr, lo, hi)


def simultaneous_region(theta_hat, sigma_hat, n: int, p: float = 0.05, zstar: ZStar | None = None,
                        **kw) -> RectRegion:
    """Rectangle with the common critical value; pass ``zstar`` to reuse one."""
    zs = simultaneous_z(sigma_hat, p, **kw) if zstar is None else zstar
    return _rect(theta_hat, sigma_hat, n, zs.z, RectKind.SIMULTANEOUS, p, zs.probability, zs.stderr)


def volume_ratio(rect: RectRegion, ell: EllipsoidRegion) -> float:
    """``(Vol(rect) / Vol(ellipsoid)) ** (1 / d)``."""
    d = len(rect.center)
    if len(ell.center) != d:
        raise ValueError("regions have different dimensions")
    return math.exp((rect.log_volume() - ell.log_volume()) / d)


@dataclass(frozen=True)
class PredictionInterval:
    p_hat: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def predict_prob_interval(x, theta_hat, sigma_hat, n: int, level: float = 0.95) -> PredictionInterval:
    """Delta-method interval for the fitted success probability at ``x``.

    ``se = p(1 - p) sqrt(x^T Sigma x / n)``; a negative quadratic form from an
    indefinite estimate is treated as zero. ``x`` may be one covariate
    vector or a ``(m, d)`` matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta_hat, dtype=np.float64)
    sigma = _matrix(sigma_hat)
    p_hat = expit(x @ theta)
    quad = np.einsum("...i,ij,...j->...", x, sigma, x)
    se = p_hat * (1 - p_hat) * np.sqrt(np.maximum(quad, 0.0) / n)
    z = normal_quantile(0.5 + level / 2)
    lower = np.clip(p_hat - z * se, 0.0, 1.0)
    upper = np.clip(p_hat + z * se, 0.0, 1.0)
    return PredictionInterval(p_hat, se, lower, upper, level)


def classify_plain(p_hat, q: float):
    return (np.asarray(p_hat) > q).astype(np.int8)


def classify_conservative(p_hat, se, q: float, z: float = None):
    """Predict 1 only when the lower confidence bound ``p_hat - z se`` exceeds ``q``."""
    if not 0 <= q < 1:
        raise ValueError(f"cutoff must lie in [0, 1), got {q}")
    if z is None:
        z = normal_quantile(0.975)
    return (np.asarray(p_hat) - z * np.asarray(se) > q).astype(np.int8)
