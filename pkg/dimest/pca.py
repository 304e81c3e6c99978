# -*- coding: UTF8 -*-
"""
Linear dimension reduction: principal components from the SVD of the (optionally mean-centered)
data, scree data and k-truncated reconstruction error curves.
"""

import logging
from typing import NamedTuple

import numpy as np

from .spectral import SvdResult, as_data_matrix, column_means, svd
from .svp import Spectrum
from .exception import ArgumentError, DegenerateSpectrumError

__all__ = [
    "PcaModel",
    "ScreeData",
    "fit_pca",
    "scree",
    "project",
    "reconstruct",
    "reconstruction_error_curve",
]

log = logging.getLogger("dimest")


class ScreeData(NamedTuple):
    normalized_variance: np.ndarray


class PcaModel:
    """
    A fitted principal component model. Instances should be created with :func:`.fit_pca`.

    :ivar np.ndarray mean:  column means removed before the SVD (zeros when not centered)
    :ivar SvdResult svd:    decomposition of the transformed training data
    :ivar bool centered:    whether the training data was mean-centered
    """

    def __init__(self, mean: np.ndarray, svd_result: SvdResult, centered: bool):
        self._mean = mean
        self._svd = svd_result
        self._centered = centered

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def svd(self) -> SvdResult:
        return self._svd

    @property
    def centered(self) -> bool:
        return self._centered

    @property
    def rank_bound(self) -> int:
        return self._svd.rank_bound

    @property
    def spectrum(self) -> Spectrum:
        """
        The singular values of the training data as a ``pca`` :class:`.Spectrum`.
        """
        return Spectrum(self._svd.singular_values, "pca")

    @property
    def components(self) -> np.ndarray:
        """
        Principal axes as rows, largest singular value first.
        """
        return self._svd.vt

    def __repr__(self):
        return (
            f"PcaModel[features={len(self._mean)}, rank_bound={self.rank_bound}, "
            f"centered={self._centered}]"
        )


def fit_pca(x, center: bool = True) -> PcaModel:
    """
    Fit a principal component model.

    Parameters
    ----------
    x : array-like
        Data matrix, rows are samples.
    center : bool
        Remove column means before the decomposition (standard PCA). Defaults to `True`.
    """
    x = as_data_matrix(x)
    mean = column_means(x) if center else np.zeros(x.shape[1])

    model = PcaModel(mean, svd(x - mean), center)
    log.debug(f"Fitted {model} on {x.shape[0]}x{x.shape[1]} data")

    return model


def scree(model: PcaModel) -> ScreeData:
    """
    Share of the total variance carried by each component: ``s_i**2 / sum(s**2)``.

    Raises
    ------
    DegenerateSpectrumError
        If all singular values are zero.
    """
    variance = model.svd.singular_values**2
    total = variance.sum()

    if total <= 0:
        raise DegenerateSpectrumError("cannot build scree data from an all-zero spectrum")

    return ScreeData(variance / total)


def _check_k(model: PcaModel, k: int):
    if not 1 <= k <= model.rank_bound:
        raise ArgumentError(f"k={k} out of range 1..{model.rank_bound}")


def project(model: PcaModel, x, k: int) -> np.ndarray:
    """
    Coordinates of `x` on the first `k` principal axes.
    """
    _check_k(model, k)
    x = as_data_matrix(x)

    if x.shape[1] != len(model.mean):
        raise ArgumentError(f"x has {x.shape[1]} features, model expects {len(model.mean)}")

    return (x - model.mean) @ model.components[:k].T


def reconstruct(model: PcaModel, x, k: int) -> np.ndarray:
    """
    Reconstruct `x` from its projection onto the first `k` principal axes, mean re-added.
    """
    return project(model, x, k) @ model.components[:k] + model.mean


def reconstruction_error_curve(model: PcaModel, x, ks) -> list[tuple[int, float]]:
    """
    Relative Frobenius reconstruction error ``||x - x_k|| / ||x||`` for every `k` in `ks`.

    An all-zero `x` is reconstructed exactly and reports an error of 0.
    """
    x = as_data_matrix(x)
    for k in ks:
        _check_k(model, k)

    norm = np.linalg.norm(x)
    curve = []

    for k in ks:
        residual = np.linalg.norm(x - reconstruct(model, x, k))
        curve.append((int(k), float(residual / norm) if norm > 0 else 0.0))

    return curve
