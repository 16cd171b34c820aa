"""Online batch bookkeeping for batch-means covariance estimation.

``EbsTracker`` keeps the equal-batch-size partition of the iterate stream
with batch sizes restricted to powers of two. When the target size doubles,
adjacent batch sums are added pairwise, so the tracker never needs the raw
chain and holds only ``O(n**(1 - beta))`` vectors.

``IbsTracker`` keeps the increasing-batch-size partition with boundaries
``floor(scale * k**((1 + alpha) / (1 - alpha)))``.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ebs_batch_size",
    "EbsTracker",
    "BatchMeans",
    "IbsPartition",
    "ibs_boundaries",
    "IbsTracker",
    "decorrelation_bound",
    "offline_batch_means",
    "SNAPSHOT_VERSION",
]

SNAPSHOT_VERSION = 1
_MAX_GAMMA = 62


def ebs_batch_size(n: int, c: float, beta: float) -> int:
    """Smallest power of two ``2**g`` (``g >= 0``) with ``c * n**beta <= 2**g``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    target = c * float(n) ** beta
    if not math.isfinite(target) or target > 2.0**_MAX_GAMMA:
        raise OverflowError(f"c * n**beta = {target} exceeds the representable batch size")
    if target <= 1:
        return 1
    g = math.ceil(math.log2(target))
    # log2 rounding can land one off in either direction
    if 2.0 ** (g - 1) >= target:
        g -= 1
    elif 2.0**g < target:
        g += 1
    return 1 << g


@dataclass(frozen=True)
class BatchMeans:
    """Means of ``count`` equal batches of ``batch_size`` consecutive iterates.

    ``means`` has shape ``(count, ..., d)``; ``center`` is the average of the
    batch means, i.e. the mean of the iterates covered by complete batches.
    """

    means: np.ndarray
    batch_size: int
    n: int

    @property
    def count(self) -> int:
        return self.means.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.means.mean(axis=0)

    @property
    def dimension(self) -> int:
        return self.means.shape[-1]


def offline_batch_means(chain, batch_size: int) -> BatchMeans:
    """Batch a stored chain ``(n, ..., d)`` into non-overlapping blocks, dropping the tail."""
    chain = np.asarray(chain, dtype=np.float64)
    a = chain.shape[0] // batch_size
    if a < 1:
        raise ValueError("chain shorter than one batch")
    blocks = chain[: a * batch_size].reshape((a, batch_size) + chain.shape[1:])
    return BatchMeans(blocks.mean(axis=1), batch_size, chain.shape[0])


class EbsTracker:
    """Doubling equal-batch-size partition maintained one iterate at a time.

    Invariant after every ``push``: ``batch_sums`` are the sums of the
    consecutive blocks of ``b_star`` iterates and ``partial_sum`` holds the
    ``partial_count < b_star`` leftover iterates, exactly as offline batching
    of the whole stream at the current ``b_star`` would give.

    ``batch_shape`` stacks independent chains that share the same clock.
    """

    def __init__(self, c: float, beta: float, d: int, batch_shape=(), batch_size: int | None = None):
        self.c = float(c)
        self.beta = float(beta)
        self.d = int(d)
        self.batch_shape = tuple(batch_shape)
        ebs_batch_size(1, self.c, self.beta)  # validates c, beta
        self._vec_shape = self.batch_shape + (self.d,)
        self.fixed_batch_size = batch_size
        if batch_size is None:
            self.b_star = ebs_batch_size(1, self.c, self.beta)
        else:
            if batch_size < 1:
                raise ValueError("batch_size must be positive")
            self.b_star = int(batch_size)
        self._sums = np.zeros((16,) + self._vec_shape)
        self.n_batches = 0
        self.partial_sum = np.zeros(self._vec_shape)
        self.partial_count = 0
        self.n_seen = 0
        self.n_doublings = 0
        self._next_double = self._threshold_after(self.b_star)

    def _threshold_after(self, b: int) -> float:
        """Smallest n at which the target batch size exceeds ``b``."""
        if self.fixed_batch_size is not None:
            return math.inf
        lo = max(int((b / self.c) ** (1.0 / self.beta)) - 2, 1)
        while ebs_batch_size(lo, self.c, self.beta) > b and lo > 1:
            lo = max(lo // 2, 1)
        n = lo
        while ebs_batch_size(n, self.c, self.beta) <= b:
            n += 1
        return n

    @property
    def batch_sums(self) -> np.ndarray:
        return self._sums[: self.n_batches]

    def push(self, theta) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self._vec_shape:
            raise ValueError(f"iterate shape {theta.shape} does not match {self._vec_shape}")
        self.partial_sum += theta
        self.partial_count += 1
        self.n_seen += 1
        if self.partial_count == self.b_star:
            self._close_partial()
        while self.n_seen >= self._next_double:
            self._double()

    def _close_partial(self) -> None:
        if self.n_batches == self._sums.shape[0]:
            grown = np.zeros((2 * self.n_batches,) + self._vec_shape)
            grown[: self.n_batches] = self._sums
            self._sums = grown
        self._sums[self.n_batches] = self.partial_sum
        self.n_batches += 1
        self.partial_sum = np.zeros(self._vec_shape)
        self.partial_count = 0

    def _double(self) -> None:
        k = self.n_batches
        half = k // 2
        if k % 2:
            # unpaired trailing batch becomes the head of the new partial batch
            self.partial_sum = self._sums[k - 1] + self.partial_sum
            self.partial_count += self.b_star
        pairs = self._sums[: 2 * half]
        self._sums[:half] = pairs[0::2] + pairs[1::2]
        self._sums[half:k] = 0.0
        self.n_batches = half
        self.b_star *= 2
        self.n_doublings += 1
        self._next_double = self._threshold_after(self.b_star)
        if self.partial_count == self.b_star:
            self._close_partial()

    def finalize(self, min_batches: int = 2) -> BatchMeans:
        """Batch means of the complete batches; the partial tail is dropped."""
        if self.n_batches < min_batches:
            raise ValueError(
                f"insufficient batches: {self.n_batches} complete batches of size "
                f"{self.b_star} after {self.n_seen} iterates (need {min_batches})"
            )
        return BatchMeans(self.batch_sums / self.b_star, self.b_star, self.n_seen)

    def total(self) -> np.ndarray:
        """Sum of every iterate pushed so far."""
        return self.batch_sums.sum(axis=0) + self.partial_sum

    def memory_vectors(self) -> int:
        return self.n_batches + 1

    # -- checkpointing -------------------------------------------------
    def snapshot(self) -> dict:
        def enc(a):
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()

        return {
            "format": "ebsgd.EbsTracker",
            "version": SNAPSHOT_VERSION,
            "c": self.c,
            "beta": self.beta,
            "d": self.d,
            "batch_shape": list(self.batch_shape),
            "fixed_batch_size": self.fixed_batch_size,
            "b_star": self.b_star,
            "n_seen": self.n_seen,
            "n_doublings": self.n_doublings,
            "partial_count": self.partial_count,
            "batch_sums": enc(self.batch_sums),
            "partial_sum": enc(self.partial_sum),
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def from_snapshot(cls, snap: dict) -> "EbsTracker":
        if snap.get("format") != "ebsgd.EbsTracker":
            raise ValueError("not an EbsTracker snapshot")
        if snap.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {snap.get('version')}")
        tr = cls(snap["c"], snap["beta"], snap["d"], tuple(snap["batch_shape"]), snap.get("fixed_batch_size"))
        shape = tr._vec_shape

        def dec(s):
            return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(np.float64)

        sums = dec(snap["batch_sums"]).reshape((-1,) + shape)
        tr._sums = np.zeros((max(16, 2 * len(sums)),) + shape)
        tr._sums[: len(sums)] = sums
        tr.n_batches = len(sums)
        tr.partial_sum = dec(snap["partial_sum"]).reshape(shape)
        tr.partial_count = int(snap["partial_count"])
        tr.b_star = int(snap["b_star"])
        tr.n_seen = int(snap["n_seen"])
        tr.n_doublings = int(snap.get("n_doublings", 0))
        tr._next_double = tr._threshold_after(tr.b_star)
        if tr.n_seen != tr.b_star * tr.n_batches + tr.partial_count:
            raise ValueError("corrupt snapshot: counts do not add up")
        return tr

    @classmethod
    def from_json(cls, text: str) -> "EbsTracker":
        return cls.from_snapshot(json.loads(text))


@dataclass(frozen=True)
class IbsPartition:
    """Batch end points ``boundaries = (tau_1, ..., tau_K)`` with ``tau_0 = 0`` implied."""

    boundaries: tuple
    exponent: float
    scale: float
    adjusted: bool = False

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(np.concatenate([[0], self.boundaries]))

    @property
    def count(self) -> int:
        return len(self.boundaries)


def _ibs_raw(n, exponent, scale):
    taus = []
    k = 1
    while True:
        t = min(math.floor(scale * k**exponent), n)
        if t > 0 and (not taus or t > taus[-1]):
            taus.append(t)
        if t >= n:
            break
        k += 1
    return tuple(taus)


def ibs_boundaries(n: int, alpha: float, scale: float = 64.0, min_batches: int = 2) -> IbsPartition:
    """Increasing batch sizes ``b_k`` proportional to ``k**((1+alpha)/(1-alpha))``.

    If fewer than ``min_batches`` batches fit in ``n`` iterates, ``scale`` is
    halved until they do and the partition is marked ``adjusted``.
    """
    if not 0.5 < alpha < 1:
        raise ValueError(f"alpha must lie in (0.5, 1), got {alpha}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if n < max(min_batches, 2):
        raise ValueError(f"cannot form {max(min_batches, 2)} batches from {n} iterates")
    exponent = (1 + alpha) / (1 - alpha)
    taus = _ibs_raw(n, exponent, scale)
    adjusted = False
    while len(taus) < max(min_batches, 2):
        scale /= 2
        adjusted = True
        taus = _ibs_raw(n, exponent, scale)
    return IbsPartition(taus, exponent, scale, adjusted)


class IbsTracker:
    """Online sums over a fixed IBS boundary sequence.

    At any point the partition is the boundaries reached so far plus a final
    (possibly short) batch ending at the current iterate.
    """

    def __init__(self, partition: IbsPartition, d: int, batch_shape=()):
        self.partition = partition
        self.d = d
        self.batch_shape = tuple(batch_shape)
        self._vec_shape = self.batch_shape + (d,)
        self._ends = list(partition.boundaries)
        self._sums = []
        self._sizes = []
        self.partial_sum = np.zeros(self._vec_shape)
        self.partial_count = 0
        self.n_seen = 0

    def push(self, theta) -> None:
        self.partial_sum += theta
        self.partial_count += 1
        self.n_seen += 1
        k = len(self._sums)
        if k < len(self._ends) and self.n_seen == self._ends[k]:
            self._sums.append(self.partial_sum)
            self._sizes.append(self.partial_count)
            self.partial_sum = np.zeros(self._vec_shape)
            self.partial_count = 0

    def finalize(self, min_batches: int = 2):
        """Return ``(means, sizes)``; the trailing partial batch is included."""
        sums = list(self._sums)
        sizes = list(self._sizes)
        if self.partial_count:
            sums.append(self.partial_sum)
            sizes.append(self.partial_count)
        if len(sums) < min_batches:
            raise ValueError(
                f"insufficient batches: {len(sums)} IBS batches after {self.n_seen} iterates"
            )
        sizes = np.asarray(sizes)
        sums = np.stack(sums)
        means = sums / sizes.reshape((-1,) + (1,) * (sums.ndim - 1))
        return means, sizes


def decorrelation_bound(j: int, k: int, schedule, lambda_min: float) -> float:
    """Upper bound ``exp(-lambda_min * sum_{i=j}^{k-1} eta_{i+1})`` on the
    correlation strength between iterates ``j < k``."""
    if not j < k:
        raise ValueError("need j < k")
    if not lambda_min > 0:
        raise ValueError("lambda_min must be positive")
    idx = np.arange(j + 1, k + 1, dtype=np.float64)
    return float(math.exp(-lambda_min * np.sum(schedule.eta0 * idx ** (-schedule.alpha))))
