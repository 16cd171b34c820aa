"""Online covariance estimation and inference for averaged SGD.

Equal-batch-size batch means are tracked in O(d log n) memory as the chain
runs; the estimates feed confidence ellipsoids, simultaneous rectangles and
delta-method prediction intervals.
"""
__version__ = "0.1.0"

from .batching import BatchMeans, EbsTracker, IbsTracker, ebs_batch_size, ibs_boundaries
from .covariance import CovEstimate, Kind, ebs_estimate, ibs_estimate, lugsail_estimate, psd_project
from .sgd import LearningRateSchedule, run_asgd

__all__ = [
    "__version__",
    "BatchMeans",
    "CovEstimate",
    "EbsTracker",
    "IbsTracker",
    "Kind",
    "LearningRateSchedule",
    "ebs_batch_size",
    "ebs_estimate",
    "ibs_boundaries",
    "ibs_estimate",
    "lugsail_estimate",
    "psd_project",
    "run_asgd",
]
