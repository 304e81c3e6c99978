# -*- coding: UTF8 -*-
"""
Experiment drivers: repeated per-digit estimation, width and sparsity sweeps, sliding-window time
series of dimension, scree and reconstruction curves. Every driver returns a :class:`RunReport`
holding its parameters, every seed it used and its result rows.
"""

import asyncio
import datetime
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import suppress
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np
import pandas as pd

from . import method as estimators
from .autoencoder import AeConfig, AeModel, autoencode, hidden_activations, save_model, train
from .data import MnistSet, ReturnsPanel, WindowSpec, digit_subset, sliding_windows, window_count
from .dimension import DEFAULT_GTE_THRESHOLD, DEFAULT_CUMULATIVE_THRESHOLD, RULES, estimate_all
from .method import MethodParams
from .pca import fit_pca, scree, reconstruction_error_curve
from .exception import (
    ArgumentError,
    DegenerateSpectrumError,
    DisconnectedGraphError,
    TrainingDivergenceError,
)

__all__ = [
    "Settings",
    "RunReport",
    "Runner",
    "derive_seed",
    "estimate_run",
    "run_scree",
    "run_recon_curve",
    "run_de_mnist",
    "run_width_sweep",
    "run_lambda_sweep",
    "run_de_timeseries",
    "run_spectra",
    "run_train",
    "run_hidden",
]

# windows handed to the runner at once
WINDOW_CHUNK = 256

# seed key of the autoencoder within one repeat, next to the subset seed
AE_SEED_KEY = 2

# failures of a single repeat or window that exclude it instead of aborting the run
EXCLUSION_REASONS = {
    TrainingDivergenceError: "diverged",
    DisconnectedGraphError: "disconnected",
    DegenerateSpectrumError: "degenerate",
}


@dataclass(frozen=True)
class Settings:
    """
    Estimator choice and the thresholds of both dimension rules.
    """

    method: str = "pca"
    params: MethodParams = field(default_factory=MethodParams)
    gte_threshold: float = DEFAULT_GTE_THRESHOLD
    cumulative_threshold: float = DEFAULT_CUMULATIVE_THRESHOLD

    def __post_init__(self):
        estimators.load(self.method)

        if not 0 < self.gte_threshold < 1:
            raise ArgumentError(f"--threshold-gte {self.gte_threshold} out of range (0, 1)")
        if not 0 < self.cumulative_threshold <= 1:
            raise ArgumentError(f"--threshold-cum {self.cumulative_threshold} out of range (0, 1]")
        if self.method == "ae" and self.params.ae_config is None:
            raise ArgumentError("the autoencoder estimator needs an AeConfig")

    def to_dict(self) -> dict:
        config = self.params.ae_config
        return {
            "method": self.method,
            "center": self.params.center,
            "k_neighbors": self.params.k_neighbors,
            "ae_config": config.to_dict() if config is not None and self.method == "ae" else None,
            "threshold_gte": self.gte_threshold,
            "threshold_cum": self.cumulative_threshold,
        }


def derive_seed(*keys) -> int:
    """
    Independent 32-bit seed for the run identified by the non-negative integers `keys`.
    """
    if any(int(k) < 0 for k in keys):
        raise ArgumentError(f"seeds must be non-negative, got {keys}")

    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, datetime.date):
        return obj.isoformat()
    if isinstance(obj, AeConfig):
        return obj.to_dict()

    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


class RunReport:
    """
    Self-describing record of one command run.

    :ivar str command:   command name
    :ivar dict params:   every parameter and base seed of the run
    :ivar list results:  flat result rows, written to the command's output file
    :ivar list runs:     one record per repeat, window or model with the seeds it used
    :ivar list failures: repeats excluded from the results, with the reason
    """

    def __init__(self, command: str, params: dict):
        self._command = command
        self._params = dict(params)
        self._results = []
        self._runs = []
        self._failures = []
        self._started = time.perf_counter()
        self._wall_time = None

    @property
    def command(self) -> str:
        return self._command

    @property
    def params(self) -> dict:
        return self._params

    @property
    def results(self) -> list:
        return self._results

    @property
    def runs(self) -> list:
        return self._runs

    @property
    def failures(self) -> list:
        return self._failures

    @property
    def wall_time_seconds(self) -> float:
        return self._wall_time

    def add_result(self, **row):
        self._results.append(row)

    def add_run(self, **run):
        self._runs.append(run)

    def add_failure(self, **failure):
        self._failures.append(failure)

    def finish(self) -> "RunReport":
        self._wall_time = time.perf_counter() - self._started
        return self

    def results_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._results)

    def to_dict(self) -> dict:
        return {
            "command": self._command,
            "params": self._params,
            "results": self._results,
            "runs": self._runs,
            "failures": self._failures,
            "wall_time_seconds": self._wall_time,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, default=_jsonable)
            f.write("\n")

    def write_results(self, path, fmt: str = "csv"):
        """
        Write the result rows as CSV or as JSON lines (``fmt="jsonl"``).
        """
        frame = self.results_frame()

        match fmt:
            case "csv":
                frame.to_csv(path, index=False)
            case "jsonl":
                frame.to_json(path, orient="records", lines=True, double_precision=15)
            case _:
                raise ArgumentError(f"Unknown result format '{fmt}'")

    def __repr__(self):
        return f"RunReport[{self._command}, results={len(self._results)}]"


class Runner:
    """
    Runs independent experiment units on an asyncio event loop. With ``jobs > 1`` the units run
    in a process pool, otherwise one after another in a worker thread. Results always come back in
    submission order.

    :ivar int jobs:                     number of worker processes
    :ivar asyncio.BaseEventLoop loop:   The event loop to run on. If none is provided, a new one
                                        will be created.
    :ivar logging.Logger logger:        If none is given, the ``dimest`` logger is used.
    """

    def __init__(self, jobs: int = 1, loop=None, logger=None):
        self._log = logger if logger else logging.getLogger("dimest")

        if jobs < 1:
            raise ArgumentError(f"--jobs must be at least 1, got {jobs}")

        self._jobs = jobs
        self._finished = 0

        if not loop:
            self._log.debug("Creating new event loop")
            self._loop = asyncio.new_event_loop()
            self._new_loop_created = True
        else:
            self._loop = loop
            self._new_loop_created = False

    @property
    def jobs(self) -> int:
        return self._jobs

    @property
    def loop(self):
        return self._loop

    def _executor(self):
        if self._jobs > 1:
            return ProcessPoolExecutor(max_workers=self._jobs)

        return ThreadPoolExecutor(max_workers=1)

    async def _run_unit(self, executor, label, fn, args, total):
        result = await self._loop.run_in_executor(executor, partial(fn, *args))

        self._finished += 1
        self._log.debug(f"{label} finished ({self._finished}/{total})")

        return result

    async def gather(self, units: list) -> list:
        """
        Run every ``(label, fn, args)`` unit and return the results in the order given. The first
        failing unit cancels the ones not yet started and its exception is raised.
        """
        if not units:
            return []

        self._finished = 0
        executor = self._executor()

        try:
            tasks = [
                self._loop.create_task(
                    self._run_unit(executor, label, fn, args, len(units)), name=label
                )
                for label, fn, args in units
            ]

            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
            for task in pending:
                with suppress(asyncio.CancelledError):
                    task.cancel()
                    await task
        finally:
            executor.shutdown(wait=True, cancel_futures=True)

        for task in tasks:
            if not task.cancelled() and task.exception():
                raise task.exception()

        return [task.result() for task in tasks]

    def run(self, units: list) -> list:
        return self._loop.run_until_complete(self.gather(units))

    def close(self):
        if self._new_loop_created and not self._loop.is_closed():
            self._loop.close()


def estimate_run(x, settings: Settings, seed=None, held_out=None) -> dict:
    """
    Estimate the dimension of `x` with both rules. A diverged autoencoder, a disconnected
    neighbor graph or an all-zero spectrum is reported in the returned record instead of raised.
    """
    method = estimators.load(settings.method)

    try:
        estimate = method.spectrum(x, settings.params, seed=seed, held_out=held_out)
        pair = estimate_all(
            estimate.spectrum, settings.gte_threshold, settings.cumulative_threshold
        )
    except tuple(EXCLUSION_REASONS) as e:
        return _excluded(e)

    run = {"gte": pair.gte.p, "cumulative": pair.cumulative.p}

    if estimate.model is not None:
        run["training_history"] = estimate.model.training_history

    return run


def _excluded(e: Exception) -> dict:
    reason = next(r for cls, r in EXCLUSION_REASONS.items() if isinstance(e, cls))
    return {"excluded": str(e), "reason": reason}


def _summarize(values: list) -> tuple:
    if not values:
        return None, None

    return float(np.mean(values)), float(np.std(values))


def _repeat_digit(mnist, digit, samples, repeats, seed, settings, held_out, runner, report, **tag):
    """
    Estimate `repeats` fresh subsets of `digit` and return ``{rule: (mean, std)}`` and the numbers
    of usable and excluded repeats.
    """
    log = logging.getLogger("dimest")
    units, seeds = [], []

    for repeat in range(repeats):
        subset_seed = derive_seed(seed, digit, repeat)
        ae_seed = derive_seed(seed, digit, repeat, AE_SEED_KEY)

        if held_out:
            both = digit_subset(mnist, digit, 2 * samples, subset_seed)
            x, h = both[:samples], both[samples:]
        else:
            x, h = digit_subset(mnist, digit, samples, subset_seed), None

        label = f"digit {digit} repeat {repeat}"
        units.append((label, estimate_run, (x, settings, ae_seed, h)))
        seeds.append((subset_seed, ae_seed))

    outcomes = runner.run(units)
    gte, cumulative = [], []

    for repeat, ((subset_seed, ae_seed), outcome) in enumerate(zip(seeds, outcomes)):
        record = dict(tag, digit=digit, repeat=repeat, subset_seed=subset_seed)
        if settings.method == "ae":
            record["ae_seed"] = ae_seed

        if "excluded" in outcome:
            log.warning(f"digit {digit} repeat {repeat} excluded: {outcome['excluded']}")
            report.add_failure(**record, reason=outcome["reason"], error=outcome["excluded"])
            continue

        report.add_run(**record, **outcome)
        gte.append(outcome["gte"])
        cumulative.append(outcome["cumulative"])

    summary = {RULES[0]: _summarize(gte), RULES[1]: _summarize(cumulative)}

    return summary, len(gte), repeats - len(gte)


def _thresholds(settings: Settings) -> dict:
    return {RULES[0]: settings.gte_threshold, RULES[1]: settings.cumulative_threshold}


def run_scree(x, center: bool = True, source: dict = None, logger=None) -> RunReport:
    """
    Normalized variance of every principal component of `x`.
    """
    log = logger if logger else logging.getLogger("dimest")
    report = RunReport("scree", {"center": center, "source": source or {}})

    data = scree(fit_pca(x, center=center))
    for index, share in enumerate(data.normalized_variance, start=1):
        report.add_result(index=index, normalized_variance=float(share))

    log.info(f"Scree data for {len(data.normalized_variance)} components")

    return report.finish()


def run_recon_curve(
    x, ks=None, center: bool = True, source: dict = None, logger=None
) -> RunReport:
    """
    Relative reconstruction error of the k-truncated PCA of `x` for every `k` in `ks`, all ranks
    when `ks` is `None`.
    """
    log = logger if logger else logging.getLogger("dimest")

    model = fit_pca(x, center=center)
    ks = list(ks) if ks is not None else list(range(1, model.rank_bound + 1))
    report = RunReport("recon", {"center": center, "ks": ks, "source": source or {}})

    for k, error in reconstruction_error_curve(model, x, ks):
        report.add_result(k=k, relative_error=error)

    log.info(f"Reconstruction error curve over {len(ks)} ranks")

    return report.finish()


def run_de_mnist(
    mnist: MnistSet,
    digits,
    settings: Settings,
    samples: int = 60,
    repeats: int = 50,
    seed: int = 0,
    held_out: bool = False,
    runner: Runner = None,
    source: dict = None,
    logger=None,
) -> RunReport:
    """
    Mean and standard deviation of the dimension of every digit over `repeats` random subsets of
    `samples` images each. Repeats whose autoencoder diverged or whose spectrum could not be
    computed are excluded and counted.
    """
    log = logger if logger else logging.getLogger("dimest")
    runner = runner if runner else Runner(logger=log)

    if repeats < 1 or samples < 2:
        raise ArgumentError(f"need repeats >= 1 and samples >= 2, got {repeats} and {samples}")

    params = dict(
        settings.to_dict(),
        digits=list(digits),
        samples=samples,
        repeats=repeats,
        seed=seed,
        held_out=held_out,
        jobs=runner.jobs,
        source=source or {},
    )
    report = RunReport("de-mnist", params)

    for digit in digits:
        log.info(f"Estimating digit {digit}: {repeats} repeats of {samples} samples")
        summary, runs, excluded = _repeat_digit(
            mnist, digit, samples, repeats, seed, settings, held_out, runner, report
        )

        for rule, threshold in _thresholds(settings).items():
            mean, std = summary[rule]
            report.add_result(
                digit=digit,
                method=settings.method,
                rule=rule,
                threshold=threshold,
                mean=mean,
                std=std,
                runs=runs,
                excluded=excluded,
            )

    return report.finish()


def run_width_sweep(
    mnist: MnistSet,
    digit: int,
    widths,
    settings: Settings,
    repeats: int = 50,
    seed: int = 0,
    held_out: bool = False,
    runner: Runner = None,
    source: dict = None,
    logger=None,
) -> RunReport:
    """
    Mean dimension of `digit` as a function of the number of samples per estimate.
    """
    log = logger if logger else logging.getLogger("dimest")
    runner = runner if runner else Runner(logger=log)

    params = dict(
        settings.to_dict(),
        digit=digit,
        widths=list(widths),
        repeats=repeats,
        seed=seed,
        held_out=held_out,
        jobs=runner.jobs,
        source=source or {},
    )
    if repeats < 1:
        raise ArgumentError(f"need repeats >= 1, got {repeats}")

    report = RunReport("width-sweep", params)

    for width in widths:
        if width < 2:
            raise ArgumentError(f"width {width} is below 2 samples")

        log.info(f"Width {width}: {repeats} repeats of digit {digit}")
        summary, runs, excluded = _repeat_digit(
            mnist, digit, width, repeats, seed, settings, held_out, runner, report, width=width
        )

        for rule, threshold in _thresholds(settings).items():
            mean, std = summary[rule]
            report.add_result(
                width=width,
                rule=rule,
                threshold=threshold,
                mean=mean,
                std=std,
                runs=runs,
                excluded=excluded,
            )

    return report.finish()


def _lambda_run(x, config: AeConfig, gte_threshold: float, cumulative_threshold: float) -> dict:
    try:
        estimate = estimators.ae_spectrum(x, MethodParams(ae_config=config))
        pair = estimate_all(estimate.spectrum, gte_threshold, cumulative_threshold)
    except tuple(EXCLUSION_REASONS) as e:
        return _excluded(e)

    return {
        "gte": pair.gte.p,
        "cumulative": pair.cumulative.p,
        "spectrum": estimate.spectrum.values.tolist(),
        "training_history": estimate.model.training_history,
    }


def run_lambda_sweep(
    x,
    lambdas,
    ae_config: AeConfig,
    seed: int = 0,
    gte_threshold: float = DEFAULT_GTE_THRESHOLD,
    cumulative_threshold: float = DEFAULT_CUMULATIVE_THRESHOLD,
    runner: Runner = None,
    source: dict = None,
    logger=None,
) -> RunReport:
    """
    Train one autoencoder per sparsity weight on the same data with the same seed and record the
    raw singular value proxies and both estimates. ``lam = 0`` is always part of the sweep.
    """
    log = logger if logger else logging.getLogger("dimest")
    runner = runner if runner else Runner(logger=log)

    lambdas = sorted(set(float(lam) for lam in lambdas) | {0.0})
    if lambdas[0] < 0:
        raise ArgumentError(f"sparsity weights must be non-negative, got {lambdas[0]}")
    Settings("ae", MethodParams(ae_config=ae_config), gte_threshold, cumulative_threshold)

    params = {
        "lambdas": lambdas,
        "seed": seed,
        "ae_config": ae_config.to_dict(),
        "threshold_gte": gte_threshold,
        "threshold_cum": cumulative_threshold,
        "jobs": runner.jobs,
        "source": source or {},
    }
    report = RunReport("lambda-sweep", params)

    units = [
        (
            f"lambda {lam}",
            _lambda_run,
            (x, ae_config.replace(lam=lam, seed=seed), gte_threshold, cumulative_threshold),
        )
        for lam in lambdas
    ]

    log.info(f"Training {len(units)} autoencoders for the sparsity sweep")

    for lam, outcome in zip(lambdas, runner.run(units)):
        if "excluded" in outcome:
            log.warning(f"lambda {lam} excluded: {outcome['excluded']}")
            report.add_failure(
                lam=lam, seed=seed, reason=outcome["reason"], error=outcome["excluded"]
            )
            continue

        report.add_run(lam=lam, seed=seed, training_history=outcome["training_history"])

        row = {"lambda": lam, "gte": outcome["gte"], "cumulative": outcome["cumulative"]}
        row.update({f"svp_{i}": v for i, v in enumerate(outcome["spectrum"], start=1)})
        report.add_result(**row)

    return report.finish()


def _windows(panel: ReturnsPanel, spec: WindowSpec):
    for index, (end_date, window) in enumerate(sliding_windows(panel, spec)):
        yield index, end_date, window


def run_de_timeseries(
    panel: ReturnsPanel,
    methods,
    settings: Settings,
    spec: WindowSpec = WindowSpec(),
    seed: int = 0,
    runner: Runner = None,
    source: dict = None,
    logger=None,
) -> RunReport:
    """
    Time series of dimension estimates over sliding windows of `panel`, one row per window end
    date, method and rule. The autoencoder of every window is seeded by the window index.
    """
    log = logger if logger else logging.getLogger("dimest")
    runner = runner if runner else Runner(logger=log)

    count = window_count(len(panel.dates), spec)
    if count == 0:
        dates = len(panel.dates)
        raise ArgumentError(f"{dates} dates are fewer than the window width {spec.width}")

    per_method = {name: replace(settings, method=name) for name in methods}
    params = dict(
        settings.to_dict(),
        methods=list(per_method),
        window=spec.width,
        stride=spec.stride,
        seed=seed,
        jobs=runner.jobs,
        tickers=len(panel.tickers),
        source=source or {},
    )
    params["ae_config"] = settings.params.ae_config.to_dict() if "ae" in per_method else None
    del params["method"]
    report = RunReport("de-timeseries", params)

    log.info(f"Estimating {count} windows of {spec.width} days with {', '.join(per_method)}")

    windows = _windows(panel, spec)
    while chunk := list(itertools.islice(windows, WINDOW_CHUNK)):
        units = []
        for index, end_date, window in chunk:
            ae_seed = derive_seed(seed, index)
            for name, method_settings in per_method.items():
                label = f"window {index} ({end_date}) {name}"
                units.append((label, estimate_run, (window, method_settings, ae_seed)))

        outcomes = iter(runner.run(units))

        for index, end_date, _ in chunk:
            for name in per_method:
                outcome = next(outcomes)
                record = {"end_date": end_date.isoformat(), "window": index, "method": name}
                if name == "ae":
                    record["seed"] = derive_seed(seed, index)

                if "excluded" in outcome:
                    log.warning(f"window ending {end_date} excluded: {outcome['excluded']}")
                    report.add_failure(
                        **record, reason=outcome["reason"], error=outcome["excluded"]
                    )
                    continue

                report.add_run(**record, **outcome)
                for rule, key in zip(RULES, ("gte", "cumulative")):
                    report.add_result(
                        end_date=end_date.isoformat(), method=name, rule=rule, p=outcome[key]
                    )

        log.info(f"{min(chunk[-1][0] + 1, count)}/{count} windows done")

    return report.finish()


def run_spectra(
    x, ae_config: AeConfig, center: bool = True, source: dict = None, logger=None
) -> RunReport:
    """
    PCA singular values next to autoencoder singular value proxies of the same data, each divided
    by its sum.
    """
    log = logger if logger else logging.getLogger("dimest")

    params = {"center": center, "ae_config": ae_config.to_dict(), "source": source or {}}
    report = RunReport("spectra", params)

    columns = {}
    method_params = MethodParams(center=center, ae_config=ae_config)
    for name in ("pca", "ae"):
        estimate = estimators.load(name).spectrum(x, method_params, logger=log)
        pair = estimate_all(estimate.spectrum)
        columns[estimate.spectrum.source] = estimate.spectrum.normalized()
        report.add_run(method=name, gte=pair.gte.p, cumulative=pair.cumulative.p)

    for i in range(max(len(v) for v in columns.values())):
        row = {"index": i + 1}
        row.update({src: float(v[i]) if i < len(v) else None for src, v in columns.items()})
        report.add_result(**row)

    return report.finish()


def run_train(
    x, ae_config: AeConfig, save_path=None, source: dict = None, logger=None
) -> RunReport:
    """
    Train one autoencoder on `x`, optionally writing the model to `save_path`. The result rows are
    the per-epoch training losses.
    """
    log = logger if logger else logging.getLogger("dimest")

    params = {"ae_config": ae_config.to_dict(), "save_model": save_path, "source": source or {}}
    report = RunReport("train", params)

    model = train(ae_config, x, logger=log)

    for epoch, value in enumerate(model.training_history, start=1):
        report.add_result(epoch=epoch, loss=value)

    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x)
    error = np.linalg.norm(x - autoencode(model, x)) / norm if norm > 0 else 0.0
    report.add_run(seed=ae_config.seed, relative_error=float(error), parameters=model.n_parameters)

    if save_path:
        save_model(model, save_path)
        log.info(f"Saved {model} to {save_path}")

    return report.finish()


def run_hidden(
    x, ae_config: AeConfig = None, model: AeModel = None, source: dict = None, logger=None
) -> RunReport:
    """
    Innermost activations of every sample of `x`, once as computed and once as absolute values
    sorted largest first. The column means of the sorted rows are the singular value proxies.

    `model` is used as given; without it one is trained on `x` with `ae_config`.
    """
    log = logger if logger else logging.getLogger("dimest")

    if model is None:
        if ae_config is None:
            raise ArgumentError("an autoencoder configuration or a trained model is required")
        model = train(ae_config, x, logger=log)

    params = {"ae_config": model.config.to_dict(), "source": source or {}}
    report = RunReport("hidden", params)

    hidden = hidden_activations(model, x).values
    ordered = -np.sort(-np.abs(hidden), axis=1)
    columns = [f"h_{j}" for j in range(1, hidden.shape[1] + 1)]

    for order, values in (("raw", hidden), ("sorted", ordered)):
        for i, row in enumerate(values):
            report.add_result(sample=i, order=order, **dict(zip(columns, row.tolist())))

    log.debug(f"Wrote {len(columns)} innermost activations of {hidden.shape[0]} samples")
    report.add_run(seed=model.config.seed, samples=hidden.shape[0], units=len(columns))

    return report.finish()
