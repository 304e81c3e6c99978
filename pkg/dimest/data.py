# -*- coding: UTF8 -*-
"""
Datasets: MNIST in IDX format, dated log-return panels read from price CSVs, sliding windows over
such panels, and seeded synthetic generators with a known number of latent factors.
"""

import datetime
import gzip
import logging
import math
import struct
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
import pandas as pd

from .spectral import as_data_matrix
from .exception import ArgumentError, DataFormatError

__all__ = [
    "MnistSet",
    "ReturnsPanel",
    "WindowSpec",
    "load_mnist_idx",
    "write_mnist_idx",
    "digit_subset",
    "load_prices_csv",
    "write_prices_csv",
    "sliding_windows",
    "window_count",
    "window_ending",
    "synth_factor_panel",
    "synth_regime_panel",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
PIXEL_SCALE = 255.0


class MnistSet(NamedTuple):
    """
    :ivar np.ndarray images:  one flattened image per row, pixel intensities scaled to [0, 1]
    :ivar np.ndarray labels:  digit label of every row
    """

    images: np.ndarray
    labels: np.ndarray


class ReturnsPanel(NamedTuple):
    """
    :ivar list dates:         strictly increasing :class:`datetime.date` of every row
    :ivar list tickers:       column names
    :ivar np.ndarray returns: daily natural-log returns, rows are dates, missing returns are 0
    """

    dates: list
    tickers: list
    returns: np.ndarray


@dataclass(frozen=True)
class WindowSpec:
    width: int = 60
    stride: int = 1

    def __post_init__(self):
        if self.width < 2:
            raise ArgumentError(f"window width must be at least 2, got {self.width}")
        if self.stride < 1:
            raise ArgumentError(f"window stride must be at least 1, got {self.stride}")


def _open(path, mode):
    return gzip.open(path, mode) if str(path).endswith(".gz") else open(path, mode)


def _read_idx(path, magic: int, ndims: int) -> np.ndarray:
    with _open(path, "rb") as f:
        data = f.read()

    header_len = 4 * (1 + ndims)
    if len(data) < header_len:
        raise DataFormatError(path, "truncated IDX header", offset=len(data))

    (found,) = struct.unpack_from(">I", data, 0)
    if found != magic:
        raise DataFormatError(
            path, f"wrong magic number 0x{found:08x}, expected 0x{magic:08x}", offset=0
        )

    dims = struct.unpack_from(f">{ndims}I", data, 4)
    expected = header_len + math.prod(dims)

    if len(data) < expected:
        raise DataFormatError(
            path, f"truncated payload, expected {expected} bytes for dims {dims}", offset=len(data)
        )
    if len(data) > expected:
        raise DataFormatError(path, "unexpected trailing bytes", offset=expected)

    pixels = np.frombuffer(data, dtype=np.uint8, count=expected - header_len, offset=header_len)
    return pixels.reshape(dims)


def load_mnist_idx(images_path, labels_path, logger=None) -> MnistSet:
    """
    Read an MNIST image/label file pair in big-endian IDX format. Files ending in ``.gz`` are
    decompressed on the fly.

    Raises
    ------
    DataFormatError
        On a wrong magic number, a truncated or overlong file, out-of-range labels, or when image
        and label counts differ.
    """
    log = logger if logger else logging.getLogger("dimest")

    pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)

    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(
            labels_path,
            f"{labels.shape[0]} labels for {pixels.shape[0]} images",
            offset=4,
        )

    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataFormatError(labels_path, f"label {labels[bad]} out of range", offset=8 + bad)

    count, rows, cols = pixels.shape
    images = pixels.reshape(count, rows * cols).astype(np.float64) / PIXEL_SCALE
    log.debug(f"Loaded {images.shape[0]} images of {rows}x{cols} pixels")

    return MnistSet(images, labels.astype(np.int64))


def write_mnist_idx(mnist: MnistSet, images_path, labels_path, side: int = 28) -> None:
    """
    Write `mnist` as an IDX image/label file pair of `side` x `side` images. Pixel values are
    scaled back to bytes and rounded.
    """
    images = np.asarray(mnist.images, dtype=np.float64)
    count = images.shape[0]

    if images.ndim != 2 or images.shape[1] != side * side:
        raise ArgumentError(f"images must have {side * side} columns for {side}x{side} pixels")
    if len(mnist.labels) != count:
        raise ArgumentError(f"{len(mnist.labels)} labels for {count} images")

    pixels = np.clip(np.rint(images * PIXEL_SCALE), 0, 255).astype(np.uint8)

    with _open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, count, side, side))
        f.write(pixels.tobytes())

    with _open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, count))
        f.write(np.asarray(mnist.labels, dtype=np.uint8).tobytes())


def digit_subset(mnist: MnistSet, digit: int, sample_count: int, seed) -> np.ndarray:
    """
    Draw `sample_count` distinct images of `digit`, uniformly at random with the given seed.
    """
    if not 0 <= digit <= 9:
        raise ArgumentError(f"digit {digit} out of range 0..9")

    candidates = np.flatnonzero(mnist.labels == digit)

    if not 1 <= sample_count <= len(candidates):
        raise ArgumentError(
            f"cannot draw {sample_count} samples of digit {digit}, "
            f"{len(candidates)} available"
        )

    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=sample_count, replace=False)

    return mnist.images[chosen]


def load_prices_csv(path, logger=None) -> ReturnsPanel:
    """
    Read end-of-day prices and turn them into daily log returns.

    The file has a ``date,TICKER1,TICKER2,...`` header and one ISO-dated row per day; an empty
    cell is a missing price. A return that cannot be computed because either price is missing,
    or because it is the first row, is 0.

    Raises
    ------
    DataFormatError
        On an unparsable date, non-increasing dates, or a non-numeric or non-positive price.
        Row numbers count the header as row 1.
    """
    log = logger if logger else logging.getLogger("dimest")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeError) as e:
        raise DataFormatError(path, f"unreadable CSV: {e}") from e

    if frame.shape[1] < 2 or frame.columns[0].strip().lower() != "date":
        raise DataFormatError(path, "header must be 'date,TICKER1,TICKER2,...'", row=1)

    dates = pd.to_datetime(frame.iloc[:, 0].str.strip(), format="ISO8601", errors="coerce")
    if dates.isna().any():
        raise DataFormatError(path, "unparsable date", row=int(np.argmax(dates.isna())) + 2)

    backwards = (dates.diff().iloc[1:] <= pd.Timedelta(0)).to_numpy()
    if backwards.any():
        row = int(np.argmax(backwards)) + 3
        raise DataFormatError(path, "dates are not strictly increasing", row=row)

    cells = frame.iloc[:, 1:].fillna("").apply(lambda col: col.str.strip())
    prices = cells.apply(pd.to_numeric, errors="coerce")

    bad = (prices.isna() & (cells != "")) | np.isinf(prices) | (prices <= 0)
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise DataFormatError(
            path, f"invalid price '{cells.iat[row, col]}' for {cells.columns[col]}", row=row + 2
        )

    returns = np.log(prices / prices.shift(1)).fillna(0.0)

    log.debug(f"Loaded {returns.shape[0]} days of returns for {returns.shape[1]} tickers")

    return ReturnsPanel(
        [d.date() for d in dates],
        [str(c).strip() for c in frame.columns[1:]],
        returns.to_numpy(dtype=np.float64),
    )


def write_prices_csv(panel: ReturnsPanel, path, start: float = 100.0) -> None:
    """
    Write the price paths implied by `panel`, every ticker starting at `start` on the first date.
    """
    growth = np.cumsum(panel.returns[1:], axis=0)
    prices = start * np.exp(np.vstack([np.zeros((1, growth.shape[1])), growth]))

    frame = pd.DataFrame(prices, columns=panel.tickers)
    frame.insert(0, "date", [d.isoformat() for d in panel.dates])
    frame.to_csv(path, index=False, float_format="%.17g")


def window_count(rows: int, spec: WindowSpec) -> int:
    return (rows - spec.width) // spec.stride + 1 if rows >= spec.width else 0


def sliding_windows(
    panel: ReturnsPanel, spec: WindowSpec = WindowSpec()
) -> Iterator[tuple[datetime.date, np.ndarray]]:
    """
    Yield ``(end_date, window)`` for every window of `spec.width` consecutive days, the first one
    ending on day `spec.width` and each next one `spec.stride` days later.

    Raises
    ------
    ArgumentError
        If the panel has fewer rows than the window is wide.
    """
    rows = panel.returns.shape[0]
    if rows < spec.width:
        raise ArgumentError(f"{rows} dates are fewer than the window width {spec.width}")

    for i in range(window_count(rows, spec)):
        end = spec.width + i * spec.stride
        yield panel.dates[end - 1], panel.returns[end - spec.width : end]


def window_ending(panel: ReturnsPanel, date: datetime.date, width: int = 60) -> np.ndarray:
    """
    The `width` most recent returns up to and including `date`.
    """
    try:
        end = panel.dates.index(date) + 1
    except ValueError as e:
        raise ArgumentError(f"{date} is not a date of the panel") from e

    if end < width:
        raise ArgumentError(f"only {end} dates up to {date}, window needs {width}")

    return panel.returns[end - width : end]


def synth_factor_panel(
    n_samples: int, n_features: int, n_factors: int, noise_std: float, seed
) -> np.ndarray:
    """
    ``A @ B + noise`` with standard normal ``A`` (n_samples x n_factors) and ``B``
    (n_factors x n_features) and i.i.d. normal noise of standard deviation `noise_std`.
    """
    if min(n_samples, n_features) < 1:
        raise ArgumentError("n_samples and n_features must be positive")
    if not 0 <= n_factors <= min(n_samples, n_features):
        raise ArgumentError(f"n_factors={n_factors} out of range 0..{min(n_samples, n_features)}")
    if noise_std < 0:
        raise ArgumentError(f"noise_std must be non-negative, got {noise_std}")

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_samples, n_factors))
    b = rng.standard_normal((n_factors, n_features))

    return a @ b + noise_std * rng.standard_normal((n_samples, n_features))


def synth_regime_panel(
    n_days: int,
    n_tickers: int,
    factors_before: int,
    factors_after: int,
    switch_day: int,
    noise_std: float = 1e-4,
    seed=0,
    scale: float = 0.01,
    start: datetime.date = datetime.date(2008, 1, 2),
) -> ReturnsPanel:
    """
    Dated returns panel driven by `factors_before` latent factors up to day `switch_day` and by
    `factors_after` factors afterwards, on a business-day calendar starting at `start`.

    Returns have a daily scale of `scale` per factor plus i.i.d. noise of `noise_std`.
    """
    if not 0 < switch_day < n_days:
        raise ArgumentError(f"switch_day={switch_day} out of range 1..{n_days - 1}")

    before = synth_factor_panel(switch_day, n_tickers, factors_before, 0.0, [seed, 0])
    after = synth_factor_panel(n_days - switch_day, n_tickers, factors_after, 0.0, [seed, 1])
    noise = np.random.default_rng([seed, 2]).standard_normal((n_days, n_tickers))

    returns = scale * np.vstack([before, after]) + noise_std * noise
    dates = [d.date() for d in pd.bdate_range(start=start, periods=n_days)]
    tickers = [f"T{i:03d}" for i in range(n_tickers)]

    return ReturnsPanel(dates, tickers, as_data_matrix(returns, "returns"))
