# -*- coding: UTF8 -*-
"""
Singular value proxies: turning a batch of innermost hidden-layer activations into a descending
non-negative spectrum that the dimension rules can consume like true singular values.
"""

import numpy as np

from .exception import InputValidationError, ArgumentError

__all__ = ["Spectrum", "SOURCES", "to_svp"]

SOURCES = ("pca", "isomap", "autoencoder")


class Spectrum:
    """
    Non-negative values sorted largest first, tagged with the method that produced them.

    :ivar np.ndarray values:  read-only spectrum values
    :ivar str source:         one of ``pca``, ``isomap`` or ``autoencoder``
    """

    def __init__(self, values, source: str):
        if source not in SOURCES:
            raise ArgumentError(f"Unknown spectrum source '{source}'")

        values = np.array(values, dtype=np.float64).ravel()

        if values.size == 0:
            raise InputValidationError(f"{source} spectrum is empty")
        if not np.all(np.isfinite(values)):
            raise InputValidationError(f"{source} spectrum holds non-finite values")
        if np.any(values < 0):
            raise InputValidationError(f"{source} spectrum holds negative values")
        if np.any(np.diff(values) > 0):
            raise InputValidationError(f"{source} spectrum is not sorted in descending order")

        values.flags.writeable = False
        self._values = values
        self._source = source

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def source(self) -> str:
        return self._source

    @property
    def total(self) -> float:
        return float(self._values.sum())

    def normalized(self) -> np.ndarray:
        """
        Return the values divided by their sum.
        """
        return self._values / self._values.sum()

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"Spectrum[source={self._source}, len={len(self._values)}]"


def to_svp(hidden) -> Spectrum:
    """
    Transform innermost hidden-layer activations into singular value proxies.

    The absolute activations of every sample are sorted largest first on their own, then the
    sorted rows are averaged column by column. Averaging rows that are each descending yields a
    descending vector.

    Parameters
    ----------
    hidden : HiddenBatch or array-like
        Activations, one row per sample.

    Returns
    -------
    Spectrum
        Proxies tagged ``autoencoder``, one per hidden unit.
    """
    z = np.asarray(getattr(hidden, "values", hidden), dtype=np.float64)

    if z.ndim != 2 or z.shape[0] < 1:
        raise ArgumentError("hidden batch must be a 2-D matrix with at least one row")
    if z.shape[1] < 1:
        raise ArgumentError("hidden batch has no units")

    m = np.abs(z)
    m_sorted = -np.sort(-m, axis=1)

    return Spectrum(m_sorted.mean(axis=0), "autoencoder")
