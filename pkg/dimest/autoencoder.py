# -*- coding: UTF8 -*-
"""
Fully-connected autoencoder trained by mini-batch gradient descent on the squared reconstruction
error plus a sparsity penalty on the innermost hidden layer.

The default penalty is the L1 norm of the L2-normalized innermost activations,
``lam * sum(|y| / ||y||)`` averaged over the batch. It is scale-invariant in ``y``, so it only
shapes how the activation mass is spread across hidden units, which is what the singular value
proxies measure. The plain L1 penalty ``lam * sum(|y|)`` is available for comparison.
"""

import json
import logging
import struct
from dataclasses import dataclass, asdict, fields, replace
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .spectral import as_data_matrix
from .exception import ArgumentError, AeConfigError, DataFormatError, TrainingDivergenceError

__all__ = [
    "ACTIVATIONS",
    "PENALTIES",
    "Activation",
    "AeConfig",
    "AeModel",
    "HiddenBatch",
    "LossTerms",
    "Gradients",
    "init_model",
    "forward",
    "loss",
    "gradients",
    "train",
    "hidden_activations",
    "autoencode",
    "save_model",
    "load_model",
]

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh")
PENALTIES = ("l1l2", "l1")

# hidden vectors shorter than this carry no sparsity penalty (the normalization is singular at 0)
NORM_EPSILON = 1e-12

MODEL_MAGIC = b"DIMEAE"
MODEL_VERSION = 1


class Activation:
    """
    Elementwise activation function with its exact derivative.
    """

    def __init__(self, kind: str):
        if kind not in ACTIVATIONS:
            raise ArgumentError(f"Unknown activation '{kind}', must be one of {ACTIVATIONS}")

        self._kind = kind

    @property
    def kind(self) -> str:
        return self._kind

    def __call__(self, z: np.ndarray) -> np.ndarray:
        match self._kind:
            case "identity":
                return z
            case "relu":
                return np.maximum(z, 0.0)
            case "sigmoid":
                return expit(z)
            case "tanh":
                return np.tanh(z)

    def derivative(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """
        Derivative at pre-activation `z`, given the activation output `a` at `z`.
        """
        match self._kind:
            case "identity":
                return np.ones_like(z)
            case "relu":
                return (z > 0).astype(z.dtype)
            case "sigmoid":
                return a * (1.0 - a)
            case "tanh":
                return 1.0 - a**2

    def __eq__(self, other):
        return isinstance(other, Activation) and other.kind == self._kind

    def __hash__(self):
        return hash(self._kind)

    def __repr__(self):
        return f"Activation[{self._kind}]"


@dataclass(frozen=True)
class AeConfig:
    """
    Complete training recipe of an autoencoder.

    Attributes
    ----------
    layer_sizes : tuple of int
        Width of every layer, input first and output last. The narrowest hidden layer is the
        innermost one.
    activations : tuple of str
        Activation of every non-input layer. The innermost hidden layer must use ``identity``.
    lam : float
        Weight of the sparsity penalty on the innermost activations.
    learning_rate : float
        Step size of plain mini-batch gradient descent.
    epochs : int
        Passes over the training data; 0 returns the initialization.
    batch_size : int
        Samples per gradient step.
    seed : int
        Seeds weight initialization and the per-epoch shuffles.
    init_scale : float, optional
        Weights start uniform in ``[-init_scale, init_scale]``; ``None`` uses
        ``1/sqrt(fan_in)`` per layer.
    penalty : str
        ``l1l2`` for the L1 norm of the L2-normalized innermost activations, ``l1`` for their
        plain L1 norm.
    """

    layer_sizes: tuple
    activations: tuple
    lam: float = 0.01
    learning_rate: float = 0.05
    epochs: int = 300
    batch_size: int = 10
    seed: int = 0
    init_scale: float = None
    penalty: str = "l1l2"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(str(a) for a in self.activations))

        if len(self.layer_sizes) < 3:
            raise AeConfigError(
                "layer_sizes", "need an input, at least one hidden and an output layer"
            )
        if any(s < 1 for s in self.layer_sizes):
            raise AeConfigError("layer_sizes", "every layer needs at least one unit")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise AeConfigError(
                "activations",
                f"expected {len(self.layer_sizes) - 1} activations, got {len(self.activations)}",
            )

        for kind in self.activations:
            if kind not in ACTIVATIONS:
                raise AeConfigError("activations", f"unknown activation '{kind}'")

        if self.activations[self.innermost - 1] != "identity":
            raise AeConfigError(
                "activations",
                f"innermost hidden layer {self.innermost} must use 'identity', "
                f"not '{self.activations[self.innermost - 1]}'",
            )

        if not self.lam >= 0:
            raise AeConfigError("lam", f"must be non-negative, got {self.lam}")
        if not self.learning_rate > 0:
            raise AeConfigError("learning_rate", f"must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise AeConfigError("epochs", f"must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise AeConfigError("batch_size", f"must be positive, got {self.batch_size}")
        if self.init_scale is not None and not self.init_scale > 0:
            raise AeConfigError("init_scale", f"must be positive, got {self.init_scale}")
        if self.penalty not in PENALTIES:
            raise AeConfigError(
                "penalty", f"unknown penalty '{self.penalty}', must be one of {PENALTIES}"
            )

    @property
    def innermost(self) -> int:
        """
        Index into `layer_sizes` of the innermost (narrowest) hidden layer.
        """
        hidden = self.layer_sizes[1:-1]
        return 1 + hidden.index(min(hidden))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def replace(self, **changes) -> "AeConfig":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise AeConfigError(", ".join(sorted(unknown)), "no such configuration field")

        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        d["activations"] = list(self.activations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AeConfig":
        try:
            return cls(**d)
        except TypeError as e:
            raise AeConfigError("*", str(e)) from e

    @classmethod
    def mnist(cls, **overrides) -> "AeConfig":
        """
        784-256-128-64-128-256-784 network for 28x28 images with a sigmoid output.
        """
        return cls(
            layer_sizes=(784, 256, 128, 64, 128, 256, 784),
            activations=("relu", "identity", "identity", "identity", "relu", "sigmoid"),
            **overrides,
        )

    @classmethod
    def returns(cls, n_tickers: int, **overrides) -> "AeConfig":
        """
        The same shape for a panel of `n_tickers` daily returns, with a tanh output.
        """
        return cls(
            layer_sizes=(n_tickers, 256, 128, 64, 128, 256, n_tickers),
            activations=("relu", "identity", "identity", "identity", "relu", "tanh"),
            **overrides,
        )


class HiddenBatch(NamedTuple):
    """
    Raw innermost-layer activations, one row per sample.
    """

    values: np.ndarray


class LossTerms(NamedTuple):
    total: float
    recon: float
    sparsity: float


class Gradients(NamedTuple):
    weights: list
    biases: list


class AeModel:
    """
    Weights and biases of an autoencoder together with the recipe that produced them.

    ``weights[l]`` has shape ``(layer_sizes[l + 1], layer_sizes[l])`` and maps layer `l` to layer
    ``l + 1``.
    """

    def __init__(self, weights: list, biases: list, config: AeConfig, training_history=None):
        sizes = config.layer_sizes
        weights = [np.asarray(w, dtype=np.float64) for w in weights]
        biases = [np.asarray(b, dtype=np.float64) for b in biases]

        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ArgumentError(f"expected {len(sizes) - 1} weight matrices and bias vectors")

        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ArgumentError(
                    f"layer {l}: weights {w.shape} / biases {b.shape} do not match "
                    f"{sizes[l]} -> {sizes[l + 1]}"
                )

        self._weights = weights
        self._biases = biases
        self._config = config
        self._activations = [Activation(a) for a in config.activations]
        self._history = list(training_history) if training_history else []

    @property
    def weights(self) -> list:
        return self._weights

    @property
    def biases(self) -> list:
        return self._biases

    @property
    def config(self) -> AeConfig:
        return self._config

    @property
    def activations(self) -> list:
        return self._activations

    @property
    def training_history(self) -> list:
        """
        Mean training loss of every epoch, oldest first.
        """
        return self._history

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self._weights, self._biases))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in self.parameters())

    def parameters(self):
        return zip(self._weights, self._biases)

    def __repr__(self):
        sizes = "-".join(str(s) for s in self._config.layer_sizes)
        return f"AeModel[{sizes}, lam={self._config.lam}, epochs={len(self._history)}]"


def init_model(config: AeConfig, rng: np.random.Generator = None) -> AeModel:
    """
    Fresh model with uniformly initialized weights and zero biases.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights, biases = [], []

    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = config.init_scale if config.init_scale is not None else 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))

    return AeModel(weights, biases, config)


def _check_batch(model: AeModel, data) -> np.ndarray:
    x = as_data_matrix(data, "batch")
    if x.shape[1] != model.config.input_size:
        raise ArgumentError(
            f"batch has {x.shape[1]} columns, model input size is {model.config.input_size}"
        )

    return x


def _forward_batch(model: AeModel, x: np.ndarray):
    pre = []
    post = [x]

    for w, b, act in zip(model.weights, model.biases, model.activations):
        z = post[-1] @ w.T + b
        pre.append(z)
        post.append(act(z))

    return pre, post


def _sparsity(y: np.ndarray, lam: float, kind: str = "l1l2"):
    """
    Per-batch penalty ``lam * mean_i sum_j |y_ij| / ||y_i||`` and its gradient w.r.t. `y`. With
    `kind` ``l1`` the rows are not normalized.
    """
    if kind == "l1":
        penalty = lam * float(np.mean(np.sum(np.abs(y), axis=1)))
        return penalty, np.sign(y) * (lam / y.shape[0])

    norms = np.linalg.norm(y, axis=1, keepdims=True)
    active = norms >= NORM_EPSILON
    safe = np.where(active, norms, 1.0)

    u = y / safe
    l1 = np.sum(np.abs(u), axis=1, keepdims=True)
    penalty = lam * float(np.mean(np.where(active, l1, 0.0)))

    grad = np.where(active, (np.sign(y) - u * l1) / safe, 0.0) * (lam / y.shape[0])

    return penalty, grad


def _loss_and_gradients(model: AeModel, x: np.ndarray):
    pre, post = _forward_batch(model, x)
    n = x.shape[0]
    inner = model.config.innermost

    residual = post[-1] - x
    recon = 0.5 * float(np.sum(residual**2)) / n
    sparsity, sparsity_grad = _sparsity(post[inner], model.config.lam, model.config.penalty)

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    upstream = residual / n

    for l in range(len(model.weights), 0, -1):
        if l == inner:
            upstream = upstream + sparsity_grad

        dz = upstream * model.activations[l - 1].derivative(pre[l - 1], post[l])
        grad_w[l - 1] = dz.T @ post[l - 1]
        grad_b[l - 1] = dz.sum(axis=0)
        upstream = dz @ model.weights[l - 1]

    return LossTerms(recon + sparsity, recon, sparsity), Gradients(grad_w, grad_b)


def forward(model: AeModel, x) -> tuple[np.ndarray, np.ndarray]:
    """
    Run one sample through the network.

    Returns
    -------
    reconstruction : np.ndarray
        Output layer values.
    hidden : np.ndarray
        Innermost hidden layer values (identity activation, so pre- and post-activation agree).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != model.config.input_size:
        raise ArgumentError(
            f"sample of shape {x.shape} does not match input size {model.config.input_size}"
        )

    _, post = _forward_batch(model, _check_batch(model, x[np.newaxis]))

    return post[-1][0], post[model.config.innermost][0]


def loss(model: AeModel, batch) -> LossTerms:
    """
    Mean half squared reconstruction error plus the sparsity penalty over `batch`.
    """
    x = _check_batch(model, batch)
    _, post = _forward_batch(model, x)

    recon = 0.5 * float(np.sum((post[-1] - x) ** 2)) / x.shape[0]
    sparsity, _ = _sparsity(
        post[model.config.innermost], model.config.lam, model.config.penalty
    )

    return LossTerms(recon + sparsity, recon, sparsity)


def gradients(model: AeModel, batch) -> Gradients:
    """
    Exact gradients of :func:`loss` with respect to every weight and bias, including the path
    through the normalization of the innermost activations.
    """
    _, grads = _loss_and_gradients(model, _check_batch(model, batch))

    return grads


def train(config: AeConfig, data, logger=None) -> AeModel:
    """
    Train an autoencoder with plain mini-batch gradient descent.

    The run is fully determined by `config`: the seed drives the initialization and the order in
    which samples are visited in every epoch.

    Raises
    ------
    TrainingDivergenceError
        If the loss or any parameter becomes NaN or infinite.
    """
    log = logger if logger else logging.getLogger("dimest")

    rng = np.random.default_rng(config.seed)
    model = init_model(config, rng)
    x = _check_batch(model, data)
    m = x.shape[0]

    log.debug(f"Training {model} on {m} samples, {config.epochs} epochs")

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(m)
        epoch_loss = 0.0

        for step, start in enumerate(range(0, m, config.batch_size), start=1):
            batch = x[order[start : start + config.batch_size]]
            terms, grads = _loss_and_gradients(model, batch)

            if not np.isfinite(terms.total):
                raise TrainingDivergenceError(epoch, step)

            for w, b, gw, gb in zip(model.weights, model.biases, grads.weights, grads.biases):
                w -= config.learning_rate * gw
                b -= config.learning_rate * gb

            if not model.is_finite():
                raise TrainingDivergenceError(epoch, step)

            epoch_loss += terms.total * len(batch)

        model.training_history.append(epoch_loss / m)
        log.debug(f"epoch {epoch}/{config.epochs}: loss={epoch_loss / m:.6g}")

    return model


def hidden_activations(model: AeModel, data) -> HiddenBatch:
    """
    Innermost hidden layer values of every sample in `data`, one row per sample.
    """
    _, post = _forward_batch(model, _check_batch(model, data))

    return HiddenBatch(post[model.config.innermost])


def autoencode(model: AeModel, data) -> np.ndarray:
    _, post = _forward_batch(model, _check_batch(model, data))

    return post[-1]


def save_model(model: AeModel, path) -> None:
    """
    Write `model` to `path`.

    Layout: 6-byte magic ``DIMEAE``, big-endian uint16 format version, big-endian uint32 length
    of a UTF-8 JSON document holding the configuration and training history, then every weight
    matrix followed by its bias vector as row-major little-endian float64.
    """
    meta = json.dumps(
        {"config": model.config.to_dict(), "training_history": model.training_history}
    ).encode("utf-8")

    with open(path, "wb") as f:
        f.write(MODEL_MAGIC + struct.pack(">H", MODEL_VERSION))
        f.write(struct.pack(">I", len(meta)))
        f.write(meta)

        for w, b in model.parameters():
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> AeModel:
    """
    Read a model written by :func:`save_model`.

    Raises
    ------
    DataFormatError
        On a wrong magic, an unsupported version, malformed metadata, or a truncated or overlong
        parameter section.
    """
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < 12 or data[:6] != MODEL_MAGIC:
        raise DataFormatError(path, "not a dimest autoencoder model", offset=0)

    (version,) = struct.unpack_from(">H", data, 6)
    if version != MODEL_VERSION:
        raise DataFormatError(path, f"unsupported model format version {version}", offset=6)

    (meta_len,) = struct.unpack_from(">I", data, 8)
    offset = 12

    try:
        meta = json.loads(data[offset : offset + meta_len].decode("utf-8"))
        config = AeConfig.from_dict(meta["config"])
        history = [float(v) for v in meta["training_history"]]
    except (UnicodeError, ValueError, KeyError, TypeError, AeConfigError) as e:
        raise DataFormatError(path, f"malformed model metadata: {e}", offset=offset) from e

    offset += meta_len
    weights, biases = [], []
    sizes = config.layer_sizes

    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        for shape in ((fan_out, fan_in), (fan_out,)):
            nbytes = 8 * int(np.prod(shape))
            if offset + nbytes > len(data):
                raise DataFormatError(path, "parameter section is truncated", offset=offset)

            arr = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset)
            (weights if len(shape) == 2 else biases).append(arr.reshape(shape).astype(np.float64))
            offset += nbytes

    if offset != len(data):
        extra = len(data) - offset
        raise DataFormatError(path, f"{extra} unexpected trailing bytes", offset=offset)

    return AeModel(weights, biases, config, history)
