#!/usr/bin/env python3
"""localno CLI: generate datasets, train and evaluate models, run verification suites."""

import argparse
import logging
import os
import sys


def setup_logging(args):
    """Configure the root handler once; library modules only log."""
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def fail_usage(message):
    print(f"Error: {message}", file=sys.stderr)
    sys.exit(2)


def load_dataset(file_path):
    """Load a dataset file, exiting on failure."""
    from src.utils.errors import LocalNOError
    from src.utils.file_io import FileIO

    if not os.path.isfile(file_path):
        fail_usage(f"file not found: {file_path}")
    try:
        return FileIO.load_dataset(file_path)
    except (LocalNOError, OSError) as e:
        fail_usage(f"failed to load dataset {file_path}: {e}")


def load_checkpoint(file_path):
    """Load a checkpoint file, exiting on failure."""
    from src.utils.errors import LocalNOError
    from src.utils.file_io import FileIO

    if not os.path.isfile(file_path):
        fail_usage(f"file not found: {file_path}")
    try:
        return FileIO.load_checkpoint(file_path)
    except (LocalNOError, OSError) as e:
        fail_usage(f"failed to load checkpoint {file_path}: {e}")


def load_config(file_path):
    """Load a flat JSON run configuration, exiting on failure."""
    from src.utils.errors import LocalNOError
    from src.utils.file_io import FileIO

    if not os.path.isfile(file_path):
        fail_usage(f"file not found: {file_path}")
    try:
        return FileIO.load_config(file_path)
    except (LocalNOError, OSError, ValueError) as e:
        fail_usage(f"failed to load config {file_path}: {e}")


def save_run(command, args, values, overrides):
    """Write the merged run configuration to <out>/config.json."""
    from src.models.config import RunConfig
    from src.utils.constants import CONFIG_FILE
    from src.utils.file_io import FileIO

    run = RunConfig(command=command, out=args.out, values=values, overrides=overrides)
    try:
        FileIO.save_run_config(run, os.path.join(args.out, CONFIG_FILE))
    except OSError as e:
        fail_usage(f"cannot write to {args.out}: {e}")
    return run


def parse_resolution(text, grid):
    """'2x' scales every axis of the grid, a bare integer sets every axis."""
    from src.controllers.geometry import make_regular_grid
    from src.models.grid import Topology

    if grid.topology not in (Topology.BOUNDED_BOX, Topology.PERIODIC_BOX):
        fail_usage(f"--resolution needs a box grid, got {grid}")
    try:
        if text.lower().endswith("x"):
            factor = int(text[:-1])
            shape = tuple(n * factor for n in grid.shape)
        else:
            shape = (int(text),) * grid.dim
    except ValueError:
        fail_usage(f"invalid resolution: {text}")
    if min(shape) < 2:
        fail_usage(f"invalid resolution: {text}")
    return make_regular_grid(shape, grid.extent, periodic=grid.topology == Topology.PERIODIC_BOX)


def cmd_gen(args):
    """Generate a dataset file."""
    from src.controllers.data import generate_bandlimited, generate_darcy, generate_parabola, task_grid
    from src.models.dataset import ParabolaSpec
    from src.utils.constants import DATASET_FILE
    from src.utils.errors import LocalNOError
    from src.utils.file_io import FileIO

    values = {
        "task": args.task, "grid": args.grid, "count": args.count, "seed": args.seed,
        "split": args.split, "scale": args.scale, "channels": args.channels,
    }
    save_run("gen", args, values, {})

    try:
        grid = task_grid(args.task, args.grid)
        if args.task == "darcy":
            dataset = generate_darcy(grid, args.count, args.seed, args.split)
        elif args.task == "parabola":
            spec = ParabolaSpec.random(args.channels, args.scale, args.seed)
            dataset = generate_parabola(grid, spec, args.seed)
        else:
            dataset = generate_bandlimited(grid, args.count, args.seed, args.split)
        path = os.path.join(args.out, DATASET_FILE)
        FileIO.save_dataset(dataset, path)
    except (LocalNOError, OSError) as e:
        fail_usage(str(e))

    print(f"Wrote {len(dataset)} {args.task} sample(s) on {grid} to {path}")


def cmd_train(args):
    """Train a model and write metrics and checkpoint."""
    from src.controllers.model import LocalNOModel
    from src.controllers.trainer import train_loop
    from src.models.config import ModelConfig, RunConfig, TrainConfig, split_train_values
    from src.utils.constants import CHECKPOINT_FILE, METRICS_FILE
    from src.utils.errors import DivergedError, InvalidArgumentError, LocalNOError
    from src.utils.file_io import FileIO

    values = load_config(args.config) if args.config else {}
    if RunConfig.is_serialized(values):
        if values["command"] != "train":
            fail_usage(f"{args.config} records a '{values['command']}' run, not a train run")
        values = dict(values["merged"])
    overrides = {
        "data": args.data, "val": args.val, "max_rel_l2": args.max_rel_l2,
        "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size,
        "seed": args.seed, "dtype": args.dtype,
    }
    merged = RunConfig("train", args.out, values, overrides).merged()
    try:
        model_values, train_values, run_values = split_train_values(merged)
    except InvalidArgumentError as e:
        fail_usage(f"invalid configuration: {e}")
    if not run_values.get("data"):
        fail_usage("no training data: pass --data or a config that records one")

    dataset = load_dataset(run_values["data"])
    val_dataset = load_dataset(run_values["val"]) if run_values.get("val") else None
    max_rel_l2 = run_values.get("max_rel_l2")
    for key, count in (("in_channels", dataset.inputs.shape[1]), ("out_channels", dataset.targets.shape[1])):
        if key not in model_values:
            model_values[key] = values[key] = count
    try:
        model_config = ModelConfig.from_dict(model_values)
        train_config = TrainConfig.from_dict(train_values)
    except (TypeError, ValueError) as e:
        fail_usage(f"invalid configuration: {e}")
    if model_config.in_channels != dataset.inputs.shape[1] or model_config.out_channels != dataset.targets.shape[1]:
        fail_usage(
            f"model expects {model_config.in_channels} -> {model_config.out_channels} channels, "
            f"dataset has {dataset.inputs.shape[1]} -> {dataset.targets.shape[1]}"
        )
    save_run("train", args, values, overrides)

    checkpoint = os.path.join(args.out, CHECKPOINT_FILE)
    metrics_path = os.path.join(args.out, METRICS_FILE)
    history = []

    def record(metrics, model):
        history.append(metrics)
        FileIO.write_metrics(metrics_path, history)
        FileIO.save_checkpoint(model.params, model_config, checkpoint, dataset.grid, metrics.epoch)

    model = LocalNOModel.init(model_config, seed=train_config.seed)
    print(f"Parameters: {model.count_params()}")
    try:
        FileIO.write_metrics(metrics_path, history)
        FileIO.save_checkpoint(model.params, model_config, checkpoint, dataset.grid, -1)
        model, history = train_loop(model, dataset, train_config, val_dataset, on_epoch=record)
    except DivergedError as e:
        if e.last_good is not None:
            FileIO.save_checkpoint(e.last_good, model_config, checkpoint, dataset.grid, e.epoch - 1)
        print(f"FAIL training diverged: {e}")
        sys.exit(1)
    except (LocalNOError, OSError) as e:
        fail_usage(str(e))

    if history:
        last = history[-1]
        print(f"Final epoch {last.epoch}: train_loss {last.train_loss:.6e} val_rel_l2 {last.val_rel_l2:.6e}")
        if max_rel_l2 is not None and not last.val_rel_l2 <= max_rel_l2:
            print(f"FAIL val_rel_l2 {last.val_rel_l2:.6e} exceeds {max_rel_l2:g}")
            sys.exit(1)
    print(f"Checkpoint written to {checkpoint}")


def cmd_eval(args):
    """Report the relative L2 error of a checkpoint on a dataset."""
    from src.controllers.data import regenerate_dataset
    from src.controllers.model import LocalNOModel
    from src.controllers.trainer import evaluate
    from src.utils.constants import EVAL_FILE
    from src.utils.errors import LocalNOError
    from src.utils.file_io import FileIO

    if args.max_transfer_ratio is not None and not args.resolution:
        fail_usage("--max-transfer-ratio needs --resolution")
    if args.max_baseline_ratio is not None and not args.baseline:
        fail_usage("--max-baseline-ratio needs --baseline")

    dataset = load_dataset(args.data)

    def load_model(path):
        config, params, _ = load_checkpoint(path)
        if config.in_channels != dataset.inputs.shape[1] or config.out_channels != dataset.targets.shape[1]:
            fail_usage(
                f"{path} expects {config.in_channels} -> {config.out_channels} channels, "
                f"dataset has {dataset.inputs.shape[1]} -> {dataset.targets.shape[1]}"
            )
        try:
            return LocalNOModel(config, params)
        except LocalNOError as e:
            fail_usage(f"{path} is inconsistent: {e}")

    model = load_model(args.checkpoint)
    baseline = load_model(args.baseline) if args.baseline else None
    native = str(dataset.grid.shape)
    try:
        rows = [["checkpoint", native, evaluate(model, dataset)]]
        if baseline is not None:
            rows.append(["baseline", native, evaluate(baseline, dataset)])
        if args.resolution:
            grid = parse_resolution(args.resolution, dataset.grid)
            transferred = regenerate_dataset(dataset, grid)
            rows.append(["checkpoint", str(grid.shape), evaluate(model, transferred, transfer=True)])
    except LocalNOError as e:
        fail_usage(f"checkpoint and data are incompatible: {e}")

    for name, shape, error in rows:
        label = "Relative L2" if name == "checkpoint" else "Baseline relative L2"
        print(f"{label} at {shape}: {error:.6e}")
    if args.out:
        save_run("eval", args, {"checkpoint": args.checkpoint, "data": args.data}, {
            "baseline": args.baseline, "resolution": args.resolution, "max_rel_l2": args.max_rel_l2,
            "max_transfer_ratio": args.max_transfer_ratio, "max_baseline_ratio": args.max_baseline_ratio,
        })
        FileIO.write_csv(os.path.join(args.out, EVAL_FILE), ["model", "resolution", "rel_l2"], rows)

    failures = []
    own = [error for name, _, error in rows if name == "checkpoint"]
    if args.max_rel_l2 is not None and not all(error <= args.max_rel_l2 for error in own):
        failures.append(f"relative L2 exceeds {args.max_rel_l2:g}")
    if args.max_transfer_ratio is not None:
        ratio = own[-1] / own[0] if own[0] > 0 else float("inf")
        print(f"Transfer ratio {rows[-1][1]} / {native}: {ratio:.4f}")
        if not ratio <= args.max_transfer_ratio:
            failures.append(f"transfer ratio {ratio:.4f} exceeds {args.max_transfer_ratio:g}")
    if args.max_baseline_ratio is not None:
        ratio = rows[0][2] / rows[1][2] if rows[1][2] > 0 else float("inf")
        print(f"Baseline ratio at {native}: {ratio:.4f}")
        if not ratio <= args.max_baseline_ratio:
            failures.append(f"baseline ratio {ratio:.4f} exceeds {args.max_baseline_ratio:g}")
    for failure in failures:
        print(f"FAIL {failure}")
    if failures:
        sys.exit(1)


def cmd_verify(args):
    """Run one verification suite, write its CSV and print PASS/FAIL lines."""
    from src.controllers.verification import run_suite
    from src.utils.constants import VERIFY_FILE_TEMPLATE
    from src.utils.file_io import FileIO

    options = {}
    if args.max_entries is not None:
        if args.suite != "gradcheck":
            fail_usage("--max-entries only applies to the gradcheck suite")
        if args.max_entries < 0:
            fail_usage(f"invalid --max-entries: {args.max_entries}")
        options["max_entries"] = args.max_entries or None
    save_run("verify", args, {"suite": args.suite}, {"max_entries": args.max_entries})
    result = run_suite(args.suite, **options)
    path = os.path.join(args.out, VERIFY_FILE_TEMPLATE.format(suite=args.suite))
    try:
        FileIO.write_csv(path, result.columns, result.rows)
    except OSError as e:
        fail_usage(f"cannot write {path}: {e}")

    for check in result.checks:
        print(check.line())
    failures = result.failures()
    if failures:
        print(f"{args.suite}: {len(failures)} of {len(result.checks)} check(s) failed:")
        for check in failures:
            print(f"  - {check.name}")
        sys.exit(1)
    print(f"{args.suite}: all {len(result.checks)} check(s) passed.")


def build_parser():
    from src.utils.constants import APP_VERSION, CLI_NAME, TASKS, VERIFY_SUITES

    parser = argparse.ArgumentParser(
        prog=CLI_NAME,
        description="localno CLI for local neural operators: data, training, evaluation and verification.",
    )
    parser.add_argument("--version", action="version", version=f"{CLI_NAME} {APP_VERSION}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only")

    subparsers = parser.add_subparsers(dest="command", required=True)

    # gen
    gen_parser = subparsers.add_parser("gen", help="Generate a synthetic dataset")
    gen_parser.add_argument("--task", required=True, choices=TASKS, help="Dataset task")
    gen_parser.add_argument("--grid", type=int, default=64, help="Points per axis (default: 64)")
    gen_parser.add_argument("--count", type=int, default=8, help="Number of samples (default: 8)")
    gen_parser.add_argument("--seed", type=int, default=0, help="Base seed (default: 0)")
    gen_parser.add_argument("--split", choices=["train", "test"], default="train",
                            help="Seed range to draw from (default: train)")
    gen_parser.add_argument("--scale", type=float, default=1.0,
                            help="Parabola coefficient scale (default: 1.0)")
    gen_parser.add_argument("--channels", type=int, default=10,
                            help="Parabola channel count (default: 10)")
    gen_parser.add_argument("--out", required=True, help="Output directory")

    # train
    train_parser = subparsers.add_parser("train", help="Train a model on a dataset")
    train_parser.add_argument("--config", help="Flat JSON run configuration, or the config.json of an earlier run")
    train_parser.add_argument("--data", help="Training dataset file (default: the one recorded in --config)")
    train_parser.add_argument("--val", help="Validation dataset file (default: training data)")
    train_parser.add_argument("--out", required=True, help="Output directory")
    train_parser.add_argument("--epochs", type=int, help="Override the epoch count")
    train_parser.add_argument("--lr", type=float, help="Override the initial learning rate")
    train_parser.add_argument("--batch-size", type=int, help="Override the batch size")
    train_parser.add_argument("--seed", type=int, help="Override the initialization and shuffle seed")
    train_parser.add_argument("--dtype", choices=["float64", "float32"], help="Parameter precision")
    train_parser.add_argument("--max-rel-l2", type=float,
                              help="Exit 1 if the final validation relative L2 exceeds this value")

    # eval
    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint on a dataset")
    eval_parser.add_argument("--checkpoint", required=True, help="Checkpoint file")
    eval_parser.add_argument("--data", required=True, help="Dataset file")
    eval_parser.add_argument("--resolution",
                             help="Also evaluate on regenerated samples at this resolution ('2x' or '128')")
    eval_parser.add_argument("--out", help="Output directory for config.json and eval.csv")
    eval_parser.add_argument("--max-rel-l2", type=float,
                             help="Exit 1 if any reported relative L2 exceeds this value")
    eval_parser.add_argument("--max-transfer-ratio", type=float,
                             help="Exit 1 if the --resolution error exceeds this multiple of the native error")
    eval_parser.add_argument("--baseline", help="Checkpoint to compare against on the same data")
    eval_parser.add_argument("--max-baseline-ratio", type=float,
                             help="Exit 1 if the error exceeds this multiple of the --baseline error")

    # verify
    verify_parser = subparsers.add_parser("verify", help="Run a verification suite")
    verify_parser.add_argument("--suite", required=True, choices=VERIFY_SUITES, help="Suite name")
    verify_parser.add_argument("--out", required=True, help="Output directory")
    verify_parser.add_argument("--max-entries", type=int,
                               help="gradcheck: entries perturbed per array (default: 24, 0 for all)")

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args)

    commands = {
        "gen": cmd_gen,
        "train": cmd_train,
        "eval": cmd_eval,
        "verify": cmd_verify,
    }

    commands[args.command](args)


if __name__ == "__main__":
    main()
