# -*- coding: UTF8 -*-
"""
Threshold rules turning a :class:`.Spectrum` into an integer intrinsic-dimension estimate.

``gte_fraction``
    Count the values whose share of the spectrum sum is at least `t` (raw values).
``cumulative_energy``
    Smallest number of leading values whose squared share of the squared sum reaches `t`.
"""

from typing import NamedTuple

import numpy as np

from .svp import Spectrum
from .exception import ArgumentError, DegenerateSpectrumError

__all__ = [
    "DimensionEstimate",
    "EstimatePair",
    "RULES",
    "DEFAULT_GTE_THRESHOLD",
    "DEFAULT_CUMULATIVE_THRESHOLD",
    "THRESHOLD_SLACK",
    "dim_gte",
    "dim_cumulative",
    "estimate_all",
]

RULES = ("gte_fraction", "cumulative_energy")

DEFAULT_GTE_THRESHOLD = 0.01
DEFAULT_CUMULATIVE_THRESHOLD = 0.90

# shares are compared against t - THRESHOLD_SLACK so that exact ties survive rounding
THRESHOLD_SLACK = 1e-12


class DimensionEstimate(NamedTuple):
    method: str
    rule: str
    threshold: float
    p: int


class EstimatePair(NamedTuple):
    gte: DimensionEstimate
    cumulative: DimensionEstimate


def _check(spectrum: Spectrum, t: float, upper_inclusive: bool) -> np.ndarray:
    if not isinstance(spectrum, Spectrum):
        raise ArgumentError(f"expected a Spectrum, got {type(spectrum).__name__}")

    if not (0 < t < 1 or (upper_inclusive and t == 1)):
        raise ArgumentError(f"threshold {t} out of range")

    if spectrum.total <= 0:
        raise DegenerateSpectrumError(f"{spectrum.source} spectrum sums to zero")

    return spectrum.values


def dim_gte(spectrum: Spectrum, t: float = DEFAULT_GTE_THRESHOLD) -> DimensionEstimate:
    """
    Number of spectrum values that make up at least a fraction `t` of the spectrum sum. A share
    counts when it is within THRESHOLD_SLACK below `t`, so ties such as 1 of 100 are kept.

    Raises
    ------
    ArgumentError
        If `t` is not in (0, 1).
    DegenerateSpectrumError
        If the spectrum is all zeros.
    """
    values = _check(spectrum, t, upper_inclusive=False)
    shares = values / values.sum()
    p = int(np.count_nonzero(shares >= t - THRESHOLD_SLACK))

    return DimensionEstimate(spectrum.source, "gte_fraction", t, p)


def dim_cumulative(
    spectrum: Spectrum, t: float = DEFAULT_CUMULATIVE_THRESHOLD
) -> DimensionEstimate:
    """
    Smallest number of leading values whose squared shares add up to at least `t`, less
    THRESHOLD_SLACK for rounding in the running sum.
    """
    values = _check(spectrum, t, upper_inclusive=True)
    squared = values**2
    total = squared.sum()

    if total <= 0:
        # every value is subnormal: squaring underflowed
        raise DegenerateSpectrumError(f"{spectrum.source} spectrum has no energy")

    cumulative = np.cumsum(squared / total)
    reached = np.flatnonzero(cumulative >= t - THRESHOLD_SLACK)
    p = int(reached[0]) + 1 if reached.size else len(values)

    return DimensionEstimate(spectrum.source, "cumulative_energy", t, p)


def estimate_all(
    spectrum: Spectrum,
    gte_threshold: float = DEFAULT_GTE_THRESHOLD,
    cumulative_threshold: float = DEFAULT_CUMULATIVE_THRESHOLD,
) -> EstimatePair:
    return EstimatePair(
        dim_gte(spectrum, gte_threshold), dim_cumulative(spectrum, cumulative_threshold)
    )
