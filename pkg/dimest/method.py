# -*- coding: UTF8 -*-
"""
Named spectrum estimators. Every estimator turns a data matrix into a :class:`.Spectrum` that the
dimension rules consume.
"""

import logging
from collections import namedtuple
from typing import NamedTuple

from .autoencoder import AeConfig, AeModel, train, hidden_activations
from .isomap import isomap_embed
from .pca import fit_pca
from .svp import Spectrum, to_svp
from .exception import ArgumentError

__all__ = [
    "Method",
    "MethodParams",
    "Estimate",
    "METHODS",
    "load",
    "pca_spectrum",
    "isomap_spectrum",
    "ae_spectrum",
]


Method = namedtuple("Method", "name spectrum")


class MethodParams(NamedTuple):
    """
    Knobs of all estimators; each estimator reads the ones it needs.

    :ivar bool center:          mean-center before the PCA
    :ivar int k_neighbors:      Isomap neighbor count
    :ivar AeConfig ae_config:   autoencoder recipe, its seed is replaced per run
    """

    center: bool = True
    k_neighbors: int = 10
    ae_config: AeConfig = None


class Estimate(NamedTuple):
    spectrum: Spectrum
    model: AeModel = None


def pca_spectrum(x, params: MethodParams, seed=None, held_out=None, logger=None) -> Estimate:
    return Estimate(fit_pca(x, center=params.center).spectrum)


def isomap_spectrum(x, params: MethodParams, seed=None, held_out=None, logger=None) -> Estimate:
    return Estimate(isomap_embed(x, params.k_neighbors, logger=logger).spectrum)


def ae_spectrum(x, params: MethodParams, seed=None, held_out=None, logger=None) -> Estimate:
    """
    Train an autoencoder on `x` and return the singular value proxies of its innermost layer.

    The proxies are computed on `held_out` when given, on the training batch otherwise.
    """
    if params.ae_config is None:
        raise ArgumentError("the autoencoder estimator needs an AeConfig")

    config = params.ae_config if seed is None else params.ae_config.replace(seed=int(seed))
    model = train(config, x, logger=logger)
    hidden = hidden_activations(model, x if held_out is None else held_out)

    return Estimate(to_svp(hidden), model)


METHODS = {
    "pca": Method("pca", pca_spectrum),
    "isomap": Method("isomap", isomap_spectrum),
    "ae": Method("ae", ae_spectrum),
}


def load(name: str, logger=None) -> Method:
    """
    Look up an estimator by name.

    Raises
    ------
    ArgumentError
        If no estimator of that name exists.
    """
    log = logger if logger else logging.getLogger("dimest")

    try:
        method = METHODS[name]
    except KeyError as e:
        raise ArgumentError(f"Unknown method '{name}', must be one of {tuple(METHODS)}") from e

    log.debug(f"Using estimator '{method.name}'")

    return method
