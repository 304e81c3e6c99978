import datetime
import os

import numpy as np
import pytest

from dimest.autoencoder import AeConfig
from dimest.data import MnistSet, synth_regime_panel, write_mnist_idx


def pytest_addoption(parser):
    parser.addoption(
        "--mnist-dir",
        default=None,
        help="Directory holding t10k-images-idx3-ubyte[.gz] and t10k-labels-idx1-ubyte[.gz]",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long autoencoder training runs")
    config.addinivalue_line("markers", "mnist: needs the real MNIST test files (--mnist-dir)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--mnist-dir"):
        return

    skip = pytest.mark.skip(reason="needs --mnist-dir")
    for item in items:
        if "mnist" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_files(request):
    """
    Paths of the official MNIST test image and label files.
    """
    root = request.config.getoption("--mnist-dir")
    paths = []

    for stem in ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
        for name in (stem, f"{stem}.gz", stem.replace("-idx", ".idx")):
            if os.path.exists(os.path.join(root, name)):
                paths.append(os.path.join(root, name))
                break
        else:
            pytest.skip(f"{stem} not found in {root}")

    return tuple(paths)


@pytest.fixture
def tiny_mnist():
    """
    200 random 28x28 "images", 20 of every digit, each digit drawn around its own template so
    that subsets of one digit are correlated.
    """
    gen = np.random.default_rng(7)
    templates = gen.uniform(0.0, 1.0, size=(10, 784))
    labels = np.repeat(np.arange(10), 20)
    noise = gen.uniform(-0.2, 0.2, size=(len(labels), 784))
    images = np.clip(templates[labels] + noise, 0.0, 1.0)

    # exact byte values so that an IDX round trip is lossless
    images = np.rint(images * 255) / 255

    return MnistSet(images, labels)


@pytest.fixture
def tiny_mnist_files(tmp_path, tiny_mnist):
    images = tmp_path / "images-idx3-ubyte"
    labels = tmp_path / "labels-idx1-ubyte"
    write_mnist_idx(tiny_mnist, images, labels)

    return str(images), str(labels)


@pytest.fixture
def small_ae_config():
    return AeConfig(
        layer_sizes=(6, 4, 2, 4, 6),
        activations=("tanh", "identity", "tanh", "identity"),
        lam=0.0,
        learning_rate=0.05,
        epochs=5,
        batch_size=4,
        seed=3,
    )


@pytest.fixture
def regime_panel():
    return synth_regime_panel(
        n_days=400,
        n_tickers=40,
        factors_before=10,
        factors_after=3,
        switch_day=200,
        noise_std=1e-5,
        seed=11,
        start=datetime.date(2008, 1, 2),
    )


@pytest.fixture
def prices_csv(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text(
        "date,AAA,BBB\n"
        "2020-01-02,100,50\n"
        "2020-01-03,110,50\n"
        "2020-01-06,,51\n"
        "2020-01-07,121,52\n"
    )

    return str(path)
