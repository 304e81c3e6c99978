import argparse
import ast
import datetime
import logging
import traceback

import dimest
from .autoencoder import PENALTIES, AeConfig, load_model
from .data import (
    WindowSpec,
    digit_subset,
    load_mnist_idx,
    load_prices_csv,
    synth_factor_panel,
    window_ending,
)
from .experiment import (
    Runner,
    Settings,
    run_scree,
    run_recon_curve,
    run_de_mnist,
    run_width_sweep,
    run_lambda_sweep,
    run_de_timeseries,
    run_spectra,
    run_train,
    run_hidden,
)
from .method import METHODS, MethodParams
from .exception import ArgumentError, DimEstError


def setup_logger(verbose):
    logging.basicConfig(format="[LOG] %(asctime)s - %(name)s - %(message)s")
    logger = logging.getLogger("dimest")
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)

    return logger


def int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{s}'") from e


def float_list(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{s}'") from e


def iso_date(s):
    try:
        return datetime.date.fromisoformat(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an ISO date, got '{s}'") from e


def parse_ae_options(options_str):
    """
    Parse the ``--ae-options`` dict literal into AeConfig field overrides.
    """
    if options_str is None:
        return {}

    try:
        options = ast.literal_eval(options_str)
    except (ValueError, SyntaxError) as e:
        raise ArgumentError(f"Invalid dictionary format for --ae-options: {options_str}") from e

    if not isinstance(options, dict):
        raise ArgumentError(f"--ae-options must be a dictionary, got {options_str}")

    return options


def ae_config(args, preset: AeConfig) -> AeConfig:
    """
    Apply the autoencoder flags and then ``--ae-options`` to `preset`.
    """
    flags = {
        "lam": args.lam,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "seed": args.seed,
        "penalty": args.penalty,
    }
    config = preset.replace(**{k: v for k, v in flags.items() if v is not None})

    return config.replace(**parse_ae_options(args.ae_options))


def load_mnist(args, logger):
    if not args.mnist_images or not args.mnist_labels:
        raise ArgumentError("--mnist-images and --mnist-labels are required")

    mnist = load_mnist_idx(args.mnist_images, args.mnist_labels, logger=logger)
    source = {"mnist_images": args.mnist_images, "mnist_labels": args.mnist_labels}

    return mnist, source


def load_matrix(args, logger):
    """
    Data matrix of a command working on a single batch, with a description of where it came from
    and the autoencoder preset that fits its shape.
    """
    if args.synthetic is not None:
        x = synth_factor_panel(args.samples, args.features, args.synthetic, args.noise, args.seed)
        source = {
            "synthetic_factors": args.synthetic,
            "samples": args.samples,
            "features": args.features,
            "noise": args.noise,
            "seed": args.seed,
        }
        return x, source, AeConfig.returns(args.features)

    if args.prices:
        if args.date is None:
            raise ArgumentError("--date is required with --prices")

        panel = load_prices_csv(args.prices, logger=logger)
        x = window_ending(panel, args.date, args.window)
        source = {"prices": args.prices, "date": args.date.isoformat(), "window": args.window}
        return x, source, AeConfig.returns(len(panel.tickers))

    mnist, source = load_mnist(args, logger)
    x = digit_subset(mnist, args.digit, args.samples, args.seed)
    source.update(digit=args.digit, samples=args.samples, seed=args.seed)

    return x, source, AeConfig.mnist()


def settings(args, preset: AeConfig = None) -> Settings:
    method = getattr(args, "method", "pca")
    config = ae_config(args, preset) if preset is not None else None
    params = MethodParams(center=args.center, k_neighbors=args.neighbors, ae_config=config)

    return Settings(method, params, args.threshold_gte, args.threshold_cum)


def cmd_scree(args, runner, logger):
    x, source, _ = load_matrix(args, logger)
    return run_scree(x, center=args.center, source=source, logger=logger)


def cmd_recon(args, runner, logger):
    x, source, _ = load_matrix(args, logger)
    return run_recon_curve(x, ks=args.ks, center=args.center, source=source, logger=logger)


def cmd_de_mnist(args, runner, logger):
    mnist, source = load_mnist(args, logger)
    return run_de_mnist(
        mnist,
        args.digits,
        settings(args, AeConfig.mnist() if args.method == "ae" else None),
        samples=args.samples,
        repeats=args.repeats,
        seed=args.seed,
        held_out=args.held_out,
        runner=runner,
        source=source,
        logger=logger,
    )


def cmd_width_sweep(args, runner, logger):
    mnist, source = load_mnist(args, logger)
    return run_width_sweep(
        mnist,
        args.digit,
        args.widths,
        settings(args, AeConfig.mnist() if args.method == "ae" else None),
        repeats=args.repeats,
        seed=args.seed,
        held_out=args.held_out,
        runner=runner,
        source=source,
        logger=logger,
    )


def cmd_lambda_sweep(args, runner, logger):
    x, source, preset = load_matrix(args, logger)
    return run_lambda_sweep(
        x,
        args.lambdas,
        ae_config(args, preset),
        seed=args.seed,
        gte_threshold=args.threshold_gte,
        cumulative_threshold=args.threshold_cum,
        runner=runner,
        source=source,
        logger=logger,
    )


def cmd_de_timeseries(args, runner, logger):
    if not args.prices:
        raise ArgumentError("--prices is required")

    panel = load_prices_csv(args.prices, logger=logger)
    base = settings(args, AeConfig.returns(len(panel.tickers)) if "ae" in args.methods else None)

    return run_de_timeseries(
        panel,
        args.methods,
        base,
        spec=WindowSpec(args.window, args.stride),
        seed=args.seed,
        runner=runner,
        source={"prices": args.prices},
        logger=logger,
    )


def cmd_spectra(args, runner, logger):
    x, source, preset = load_matrix(args, logger)
    return run_spectra(x, ae_config(args, preset), center=args.center, source=source, logger=logger)


def cmd_train(args, runner, logger):
    x, source, preset = load_matrix(args, logger)
    return run_train(
        x, ae_config(args, preset), save_path=args.save_model, source=source, logger=logger
    )


def cmd_hidden(args, runner, logger):
    x, source, preset = load_matrix(args, logger)

    if args.model:
        model = load_model(args.model)
        source["model"] = args.model
        return run_hidden(x, model=model, source=source, logger=logger)

    return run_hidden(x, ae_config(args, preset), source=source, logger=logger)


def add_output_args(p):
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--out", required=True, help="Result file (CSV, JSON lines for time series).")
    p.add_argument(
        "--report",
        default=None,
        help="Run report JSON. Defaults to the --out path with '.report.json' appended.",
    )
    p.add_argument("--seed", type=int, default=0, help="Base seed of every random choice.")
    p.add_argument(
        "--jobs", type=int, default=1, help="Worker processes for repeats and windows."
    )


def add_threshold_args(p):
    p.add_argument("--threshold-gte", type=float, default=0.01, help="Share for the >= rule.")
    p.add_argument(
        "--threshold-cum", type=float, default=0.90, help="Energy for the cumulative rule."
    )


def add_mnist_args(p):
    p.add_argument("--mnist-images", help="MNIST image file in IDX format (may be gzipped).")
    p.add_argument("--mnist-labels", help="MNIST label file in IDX format (may be gzipped).")


def add_batch_args(p):
    add_mnist_args(p)
    p.add_argument("--digit", type=int, default=0, help="Digit whose images are used.")
    p.add_argument(
        "--samples", "--width", dest="samples", type=int, default=60, help="Rows per estimate."
    )
    p.add_argument(
        "--synthetic",
        type=int,
        metavar="FACTORS",
        default=None,
        help="Use a synthetic factor panel with this many latent factors instead of MNIST.",
    )
    p.add_argument("--features", type=int, default=100, help="Columns of the synthetic panel.")
    p.add_argument("--noise", type=float, default=1e-3, help="Noise std of the synthetic panel.")
    p.add_argument("--prices", help="Price CSV, used with --date instead of MNIST.")
    p.add_argument("--date", type=iso_date, help="Last day of the returns window.")
    p.add_argument("--window", type=int, default=60, help="Days per returns window.")


def add_method_args(p, multiple=False):
    if multiple:
        p.add_argument(
            "--method",
            dest="methods",
            nargs="+",
            choices=tuple(METHODS),
            default=["pca"],
            help="Estimators to run on every window.",
        )
    else:
        p.add_argument("--method", choices=tuple(METHODS), default="pca", help="Estimator.")

    p.add_argument("--neighbors", type=int, default=10, help="Isomap neighbor count.")
    p.add_argument(
        "--no-center", dest="center", action="store_false", help="Skip mean-centering for PCA."
    )


def add_ae_args(p):
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="Sparsity weight.")
    p.add_argument("--epochs", type=int, default=None, help="Training epochs.")
    p.add_argument("--batch-size", type=int, default=None, help="Samples per gradient step.")
    p.add_argument("--learning-rate", type=float, default=None, help="Gradient descent step.")
    p.add_argument(
        "--penalty",
        choices=PENALTIES,
        default=None,
        help="Sparsity penalty on the innermost layer.",
    )
    p.add_argument(
        "--ae-options",
        type=str,
        default=None,
        help="Dictionary literal overriding autoencoder configuration fields, "
        + "e.g. \"{'layer_sizes': (784, 64, 784), 'activations': ('identity', 'sigmoid')}\".",
    )


def add_repeat_args(p):
    p.add_argument("--repeats", type=int, default=50, help="Random subsets per estimate.")
    p.add_argument(
        "--held-out",
        action="store_true",
        help="Compute autoencoder proxies on a disjoint subset instead of the training batch.",
    )


def build_parser():
    arg_parser = argparse.ArgumentParser(
        prog="dimest", description="Estimate the intrinsic dimension of datasets."
    )
    arg_parser.add_argument("--version", action="version", version=dimest.__version__)
    commands = arg_parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("scree", help="Normalized variance per principal component.")
    add_output_args(p)
    add_batch_args(p)
    p.add_argument("--no-center", dest="center", action="store_false")
    p.set_defaults(func=cmd_scree, fmt="csv")

    p = commands.add_parser("recon", help="PCA reconstruction error per truncation rank.")
    add_output_args(p)
    add_batch_args(p)
    p.add_argument("--ks", type=int_list, default=None, help="Ranks, e.g. '1,2,5,10'.")
    p.add_argument("--no-center", dest="center", action="store_false")
    p.set_defaults(func=cmd_recon, fmt="csv")

    p = commands.add_parser("de-mnist", help="Mean dimension of MNIST digits.")
    add_output_args(p)
    add_threshold_args(p)
    add_mnist_args(p)
    add_method_args(p)
    add_ae_args(p)
    add_repeat_args(p)
    p.add_argument(
        "--digits", type=int_list, default=list(range(10)), help="Digits, e.g. '0,1,7'."
    )
    p.add_argument("--samples", "--width", dest="samples", type=int, default=60)
    p.set_defaults(func=cmd_de_mnist, fmt="csv")

    p = commands.add_parser("width-sweep", help="Mean dimension against samples per estimate.")
    add_output_args(p)
    add_threshold_args(p)
    add_mnist_args(p)
    add_method_args(p)
    add_ae_args(p)
    add_repeat_args(p)
    p.add_argument("--digit", type=int, default=0)
    p.add_argument(
        "--widths", type=int_list, default=[2, 10, 30, 60, 90], help="Sample counts."
    )
    p.set_defaults(func=cmd_width_sweep, fmt="csv", method="ae")

    p = commands.add_parser("lambda-sweep", help="Proxies and dimension against sparsity weight.")
    add_output_args(p)
    add_threshold_args(p)
    add_batch_args(p)
    add_ae_args(p)
    p.add_argument(
        "--lambdas", type=float_list, default=[0.0, 0.01, 0.1, 1.0], help="Sparsity weights."
    )
    p.set_defaults(func=cmd_lambda_sweep, fmt="csv")

    p = commands.add_parser("de-timeseries", help="Dimension over sliding windows of returns.")
    add_output_args(p)
    add_threshold_args(p)
    add_method_args(p, multiple=True)
    add_ae_args(p)
    p.add_argument("--prices", help="Price CSV with a 'date,TICKER1,...' header.")
    p.add_argument("--window", type=int, default=60, help="Days per window.")
    p.add_argument("--stride", type=int, default=1, help="Days between window ends.")
    p.set_defaults(func=cmd_de_timeseries, fmt="jsonl")

    p = commands.add_parser("spectra", help="PCA singular values next to autoencoder proxies.")
    add_output_args(p)
    add_batch_args(p)
    add_ae_args(p)
    p.add_argument("--no-center", dest="center", action="store_false")
    p.set_defaults(func=cmd_spectra, fmt="csv")

    p = commands.add_parser("train", help="Train one autoencoder and write its loss history.")
    add_output_args(p)
    add_batch_args(p)
    add_ae_args(p)
    p.add_argument("--save-model", default=None, help="Write the trained model to this file.")
    p.set_defaults(func=cmd_train, fmt="csv")

    p = commands.add_parser("hidden", help="Raw and sorted innermost activations per sample.")
    add_output_args(p)
    add_batch_args(p)
    add_ae_args(p)
    p.add_argument("--model", default=None, help="Use this trained model instead of training one.")
    p.set_defaults(func=cmd_hidden, fmt="csv")

    return arg_parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger = setup_logger(args.verbose)
    runner = None

    try:
        runner = Runner(jobs=args.jobs, logger=logger)
        report = args.func(args, runner, logger)

        report.write_results(args.out, args.fmt)
        report.write_json(args.report if args.report else f"{args.out}.report.json")
        logger.info(f"{report} written to {args.out} in {report.wall_time_seconds:.1f}s")
    except DimEstError as e:
        logger.error(f"{e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{e}")
        return 2
    except Exception as e:
        tb = traceback.extract_tb(e.__traceback__)[-1]
        logger.error(f"Internal error: {e} ({tb.filename}:{tb.lineno})")
        return 1
    finally:
        if runner:
            runner.close()

    return 0
