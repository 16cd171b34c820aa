"""Batch-means estimators of the ASGD asymptotic covariance.

All estimators broadcast over leading chain dimensions of the batch means,
returning matrices of shape ``(..., d, d)``.
"""
from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass

import numpy as np

from .batching import BatchMeans

__all__ = [
    "Kind",
    "CovEstimate",
    "ebs_estimate",
    "pair_merge",
    "lugsail_estimate",
    "ibs_estimate",
    "psd_project",
    "symmetrize",
]


class Kind(str, enum.Enum):
    EBS = "EBS"
    EBS2B = "EBS2B"
    LUGSAIL = "LUGSAIL"
    IBS = "IBS"
    TRUE = "TRUE"


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


@dataclass(frozen=True)
class CovEstimate:
    """A covariance estimate and the batching it came from.

    ``batch_size`` is 0 for IBS estimates, whose batches are unequal.
    """

    matrix: np.ndarray
    kind: Kind
    batch_size: int
    n_batches: int
    n: int
    projected: bool = False

    @property
    def dimension(self) -> int:
        return self.matrix.shape[-1]

    @property
    def min_eigenvalue(self):
        return np.linalg.eigvalsh(self.matrix)[..., 0]

    @property
    def indefinite(self):
        return self.min_eigenvalue < 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "b_n": int(self.batch_size),
            "a_n": int(self.n_batches),
            "n": int(self.n),
            "d": int(self.dimension),
            "matrix": np.asarray(self.matrix).tolist(),
            "projected": bool(self.projected),
            "min_eigenvalue": float(np.min(self.min_eigenvalue)),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "CovEstimate":
        m = np.asarray(obj["matrix"], dtype=np.float64)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.shape[-1] != m.shape[-2]:
            raise ValueError("covariance matrix must be square")
        return cls(m, Kind(obj.get("kind", "EBS")), int(obj.get("b_n", 0)), int(obj.get("a_n", 0)),
                   int(obj["n"]), bool(obj.get("projected", False)))

    @classmethod
    def from_json(cls, text: str) -> "CovEstimate":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Upper triangle, one ``i,j,value`` row per entry."""
        m = np.asarray(self.matrix)
        if m.ndim != 2:
            raise ValueError("CSV export is for a single estimate")
        out = io.StringIO()
        out.write("i,j,value\n")
        d = m.shape[0]
        for i in range(d):
            for j in range(i, d):
                out.write(f"{i},{j},{m[i, j]!r}\n")
        return out.getvalue()


def _scatter(means: np.ndarray, center: np.ndarray, weights) -> np.ndarray:
    dev = means - center
    if np.ndim(weights) == 0:
        s = np.einsum("k...i,k...j->...ij", dev, dev) * weights
    else:
        w = np.asarray(weights, dtype=np.float64).reshape((-1,) + (1,) * (dev.ndim - 1))
        s = np.einsum("k...i,k...j->...ij", w * dev, dev)
    return symmetrize(s)


def ebs_estimate(bm: BatchMeans) -> CovEstimate:
    """``(b / a) * sum_k (m_k - m)(m_k - m)^T`` with ``m`` the average batch mean."""
    a = bm.count
    if a < 2:
        raise ValueError(f"insufficient batches: EBS estimate needs >= 2, got {a}")
    mat = _scatter(bm.means, bm.center, bm.batch_size / a)
    return CovEstimate(mat, Kind.EBS, bm.batch_size, a, bm.n)


def pair_merge(bm: BatchMeans) -> BatchMeans:
    """Average adjacent batch means into batches of twice the size.

    An odd trailing batch mean is dropped.
    """
    if bm.count < 4:
        raise ValueError(f"lugsail needs >= 4 batches, got {bm.count}")
    half = bm.count // 2
    m = bm.means[: 2 * half]
    merged = 0.5 * (m[0::2] + m[1::2])
    return BatchMeans(merged, 2 * bm.batch_size, bm.n)


def lugsail_estimate(bm: BatchMeans) -> CovEstimate:
    """Bias-reduced ``2 * Sigma(2b) - Sigma(b)``; may be indefinite."""
    small = ebs_estimate(bm)
    merged = pair_merge(bm)
    big = ebs_estimate(merged)
    mat = symmetrize(2.0 * big.matrix - small.matrix)
    return CovEstimate(mat, Kind.LUGSAIL, bm.batch_size, bm.count, bm.n)


def ebs2b_estimate(bm: BatchMeans) -> CovEstimate:
    est = ebs_estimate(pair_merge(bm))
    return CovEstimate(est.matrix, Kind.EBS2B, est.batch_size, est.n_batches, est.n)


def ibs_estimate(means, sizes, center=None) -> CovEstimate:
    """General batch-means estimator for unequal batch sizes.

    ``means`` is ``(K, ..., d)`` and ``sizes`` the ``K`` batch lengths. The
    center defaults to the size-weighted mean, i.e. the mean of every covered
    iterate.
    """
    means = np.asarray(means, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    K = means.shape[0]
    if K < 2:
        raise ValueError(f"insufficient batches: IBS estimate needs >= 2, got {K}")
    if sizes.shape != (K,):
        raise ValueError("one size per batch required")
    n = sizes.sum()
    if center is None:
        w = sizes.reshape((-1,) + (1,) * (means.ndim - 1))
        center = (w * means).sum(axis=0) / n
    mat = _scatter(means, center, sizes / K)
    return CovEstimate(mat, Kind.IBS, 0, K, int(n))


def psd_project(est: CovEstimate, rel_eps: float = 1e-10) -> CovEstimate:
    """Clip eigenvalues below ``rel_eps * trace / d`` (a tiny positive floor)."""
    m = symmetrize(np.asarray(est.matrix, dtype=np.float64))
    d = m.shape[-1]
    vals, vecs = np.linalg.eigh(m)
    scale = np.trace(m, axis1=-2, axis2=-1) / d
    scale = np.where(scale > 0, scale, np.abs(vals).max(axis=-1))
    scale = np.where(scale > 0, scale, 1.0)
    eps = rel_eps * scale
    if np.all(vals >= eps[..., None]):
        return est
    clipped = np.maximum(vals, eps[..., None])
    out = symmetrize((vecs * clipped[..., None, :]) @ np.swapaxes(vecs, -1, -2))
    return CovEstimate(out, est.kind, est.batch_size, est.n_batches, est.n, projected=True)
