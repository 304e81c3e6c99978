# -*- coding: UTF8 -*-
"""
Isomap: a k-nearest-neighbor graph, all-pairs geodesic distances through it, and the spectrum of
the double-centered squared geodesic distance (Gram) matrix.
"""

import logging
from typing import NamedTuple

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, floyd_warshall
from scipy.spatial.distance import cdist

from .spectral import as_data_matrix, fix_signs
from .svp import Spectrum
from .exception import ArgumentError, InputValidationError, DisconnectedGraphError, NumericError

__all__ = [
    "NeighborGraph",
    "GeodesicMatrix",
    "IsomapResult",
    "knn_graph",
    "geodesics",
    "double_center",
    "isomap_embed",
]

# negative Gram eigenvalues below this fraction of the largest are rounding noise
NEGATIVE_EIGEN_NOTICE = 1e-6


class NeighborGraph(NamedTuple):
    """
    Edge lengths of a symmetric neighbor graph; ``inf`` marks absent edges.
    """

    distances: np.ndarray


class GeodesicMatrix(NamedTuple):
    distances: np.ndarray


class IsomapResult(NamedTuple):
    embedding: np.ndarray
    spectrum: Spectrum


def _check_square(d: np.ndarray, name: str) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise InputValidationError(f"{name} must be a non-empty square matrix")

    return d


def knn_graph(x, k: int) -> NeighborGraph:
    """
    Connect every sample to its `k` nearest Euclidean neighbors.

    Equal distances are resolved in favour of the lower sample index. An edge is kept if either
    endpoint selected the other.

    Parameters
    ----------
    x : array-like
        Data matrix with m samples as rows.
    k : int
        Neighbor count, ``1 <= k < m``.
    """
    x = as_data_matrix(x)
    m = x.shape[0]

    if not 1 <= k < m:
        raise ArgumentError(f"k={k} out of range 1..{m - 1}")

    dist = cdist(x, x)
    ranked = dist.copy()
    np.fill_diagonal(ranked, np.inf)
    neighbors = np.argsort(ranked, axis=1, kind="stable")[:, :k]

    graph = np.full((m, m), np.inf)
    rows = np.repeat(np.arange(m), k)
    cols = neighbors.ravel()
    graph[rows, cols] = dist[rows, cols]
    graph = np.minimum(graph, graph.T)
    np.fill_diagonal(graph, 0.0)

    return NeighborGraph(graph)


def geodesics(g: NeighborGraph) -> GeodesicMatrix:
    """
    All-pairs shortest path lengths through the neighbor graph (Floyd-Warshall).

    Raises
    ------
    DisconnectedGraphError
        If some pair of samples is not connected.
    """
    dist = _check_square(g.distances, "neighbor graph")

    # inf is the null value so that zero-length edges between duplicate samples survive
    sparse = csgraph_from_dense(dist, null_value=np.inf)
    paths = floyd_warshall(sparse, directed=False)

    unreachable = np.argwhere(np.isinf(paths))
    if unreachable.size:
        i, j = (int(v) for v in unreachable[0])
        raise DisconnectedGraphError(i, j)

    np.fill_diagonal(paths, 0.0)

    return GeodesicMatrix(paths)


def double_center(d: GeodesicMatrix) -> np.ndarray:
    """
    Gram matrix ``S = -1/2 * J D**2 J`` with ``J`` the centering matrix, computed from row,
    column and grand means of the squared distances.
    """
    dist = _check_square(getattr(d, "distances", d), "distance matrix")

    if not np.allclose(dist, dist.T):
        raise InputValidationError("distance matrix is not symmetric")

    sq = dist**2
    row_means = sq.mean(axis=1, keepdims=True)
    col_means = sq.mean(axis=0, keepdims=True)

    gram = -0.5 * (sq - row_means - col_means + sq.mean())

    return (gram + gram.T) / 2


def isomap_embed(x, k_neighbors: int = 10, dims: int = 2, logger=None) -> IsomapResult:
    """
    Run the whole Isomap pipeline.

    Parameters
    ----------
    x : array-like
        Data matrix, rows are samples.
    k_neighbors : int
        Neighbor count for the graph. Defaults to 10.
    dims : int
        Number of embedding coordinates returned.

    Returns
    -------
    IsomapResult
        ``embedding`` has one row per sample and `dims` columns; ``spectrum`` holds the
        eigenvalues of the Gram matrix with negative ones clamped to zero, largest first.
    """
    log = logger if logger else logging.getLogger("dimest")
    x = as_data_matrix(x)

    if not 1 <= dims <= x.shape[0]:
        raise ArgumentError(f"dims={dims} out of range 1..{x.shape[0]}")

    gram = double_center(geodesics(knn_graph(x, k_neighbors)))

    try:
        evals, evecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as e:
        n = gram.shape[0]
        raise NumericError(f"eigendecomposition of {n}x{n} Gram matrix: {e}", 1) from e

    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs, _ = fix_signs(evecs[:, order])

    if evals[-1] < 0 and -evals[-1] > NEGATIVE_EIGEN_NOTICE * max(evals[0], 0.0):
        log.debug(f"Isomap: clamping negative Gram eigenvalues down to {evals[-1]:.3g}")

    clamped = np.clip(evals, 0.0, None)
    embedding = evecs[:, :dims] * np.sqrt(clamped[:dims])

    return IsomapResult(embedding, Spectrum(clamped, "isomap"))
