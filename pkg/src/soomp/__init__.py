"""Simultaneous optimized orthogonal matching pursuit and its applications.

Greedy simultaneous sparse approximation of many signals in one common
subspace, with a heartbeat-based ECG codec and a stereo audio benchmark.
"""

__version__ = "0.1.0"

from .dictionary import Dictionary, Family, build_cdf97, build_rdct, build_rdst, union
from .pursuit import (
    ApproximationResult,
    SignalSet,
    StopMode,
    StopRule,
    run_somp,
    run_soomp,
)

__all__ = [
    "ApproximationResult",
    "Dictionary",
    "Family",
    "SignalSet",
    "StopMode",
    "StopRule",
    "build_cdf97",
    "build_rdct",
    "build_rdst",
    "run_somp",
    "run_soomp",
    "union",
]
