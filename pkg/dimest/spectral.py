# -*- coding: UTF8 -*-
"""
Dense linear-algebra kernels shared by every spectrum backend.

A data matrix is a two-dimensional ``float64`` :class:`numpy.ndarray` whose rows are samples and
whose columns are features. All functions here are pure and never modify their inputs.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exception import InputValidationError, ArgumentError, NumericError

__all__ = [
    "SvdResult",
    "as_data_matrix",
    "svd",
    "truncated_reconstruct",
    "column_means",
    "fix_signs",
]

SVD_DRIVERS = ("gesdd", "gesvd")


class SvdResult(NamedTuple):
    """
    Thin singular value decomposition ``x = u @ diag(singular_values) @ vt``.

    Attributes
    ----------
    u : np.ndarray
        Left singular vectors, shape (m, r) with r = min(m, n).
    singular_values : np.ndarray
        Non-negative singular values of length r, largest first.
    vt : np.ndarray
        Right singular vectors as rows, shape (r, n).
    """

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    @property
    def rank_bound(self) -> int:
        return len(self.singular_values)


def as_data_matrix(x, name: str = "x") -> np.ndarray:
    """
    Validate `x` as a data matrix and return it as a ``float64`` array.

    Raises
    ------
    InputValidationError
        If `x` is not two-dimensional, has no rows or columns, or holds NaN/Inf.
    """
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InputValidationError(f"{name}: not a real matrix ({e})") from e

    if arr.ndim != 2:
        raise InputValidationError(f"{name}: expected a 2-D matrix, got {arr.ndim} dimension(s)")

    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputValidationError(f"{name}: matrix must have at least one row and column")

    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise InputValidationError(f"{name}: non-finite entry at {bad}")

    return arr


def fix_signs(u: np.ndarray, vt: np.ndarray = None):
    """
    Flip singular vector pairs so that the largest-magnitude entry of every column of `u` is
    positive. `vt` rows are flipped along with their partner columns.
    """
    if u.size == 0:
        return u, vt

    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivots, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0

    u = u * signs
    if vt is not None:
        vt = vt * signs[:, np.newaxis]

    return u, vt


def svd(x) -> SvdResult:
    """
    Compute the thin SVD of a data matrix with deterministic signs.

    LAPACK's divide-and-conquer driver is tried first; if it fails to converge the slower but
    more robust QR-iteration driver is used before giving up.

    Raises
    ------
    InputValidationError
        If `x` is not a valid data matrix.
    NumericError
        If neither driver converges.
    """
    x = as_data_matrix(x)

    for attempt, driver in enumerate(SVD_DRIVERS, start=1):
        try:
            u, s, vt = scipy.linalg.svd(
                x, full_matrices=False, check_finite=False, lapack_driver=driver
            )
            break
        except np.linalg.LinAlgError as e:
            if attempt == len(SVD_DRIVERS):
                raise NumericError(f"SVD of {x.shape[0]}x{x.shape[1]} matrix: {e}", attempt) from e

    u, vt = fix_signs(u, vt)

    return SvdResult(u, s, vt)


def truncated_reconstruct(s: SvdResult, k: int) -> np.ndarray:
    """
    Rebuild the matrix from its `k` largest singular triplets.

    Parameters
    ----------
    s : SvdResult
        Decomposition to truncate.
    k : int
        Number of singular values kept, ``1 <= k <= r``.
    """
    r = s.rank_bound
    if not 1 <= k <= r:
        raise ArgumentError(f"k={k} out of range 1..{r}")

    return (s.u[:, :k] * s.singular_values[:k]) @ s.vt[:k]


def column_means(x) -> np.ndarray:
    return as_data_matrix(x).mean(axis=0)
