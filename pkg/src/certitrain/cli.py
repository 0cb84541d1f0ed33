"""Command-line entry points.

Exit codes are stable for scripting: 0 means success (certified / no
violations), 1 means the goal was not reached (not certified, violations
found, diverged), 2 means a usage, file, or configuration error.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import demo as demo_nets
from .errors import CertitrainError, DivergenceError
from .network import load_network
from .properties import load_properties
from .regions import RegionSet
from .report import save_run
from .sampling import (read_dataset_csv, sample_bound_violations,
                       sample_labeled_dataset, sample_satisfaction,
                       write_dataset_csv)
from .training import Dataset, PlateauDecay, TrainConfig, certify, train

EXIT_OK = 0
EXIT_UNCERTIFIED = 1
EXIT_USAGE = 2


def _fail_usage(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _print_epoch_header():
    click.echo(f"{'epoch':>5}  {'correctness_loss':>18}  {'accuracy_loss':>14}  {'regions':>7}")


def _print_epoch(stats):
    click.echo(f"{stats.epoch:>5}  {stats.loss_correct:>18.10g}  "
               f"{stats.loss_accuracy:>14.10g}  {stats.regions:>7}")


def _train_options(default_lr, default_optimizer):
    def wrap(fn):
        options = [
            click.option("--lr", type=float, default=default_lr, show_default=True,
                         help="Learning rate."),
            click.option("--k", type=int, default=200, show_default=True,
                         help="Regions refined per epoch."),
            click.option("--region-cap", type=int, default=5000, show_default=True,
                         help="Stop refining once this many regions exist."),
            click.option("--eps-accuracy", type=float, default=0.1, show_default=True,
                         help="Accuracy loss bound required for certification."),
            click.option("--max-epochs", type=int, default=100, show_default=True,
                         help="Epoch budget."),
            click.option("--optimizer", type=click.Choice(["sgd", "adam"]),
                         default=default_optimizer, show_default=True),
            click.option("--no-decay", is_flag=True,
                         help="Disable plateau learning-rate decay."),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option("--no-refine", is_flag=True,
                         help="Disable input-space refinement."),
            click.option("--threads", type=int, default=1, show_default=True,
                         help="Worker threads for per-region evaluation."),
        ]
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


def _build_config(lr, k, region_cap, eps_accuracy, max_epochs, optimizer,
                  no_decay, seed, no_refine, threads):
    return TrainConfig(
        lr=lr, k=k, region_cap=region_cap, eps_accuracy=eps_accuracy,
        max_epochs=max_epochs, optimizer=optimizer,
        lr_decay=None if no_decay else PlateauDecay(),
        seed=seed, refine=not no_refine, workers=threads,
    )


def _run_training(net, region_set, dataset, cfg, out):
    _print_epoch_header()
    started = time.perf_counter()
    try:
        net, region_set, report = train(net, region_set, dataset, cfg,
                                        on_epoch=_print_epoch)
    except DivergenceError as exc:
        click.echo(f"aborted: {exc}", err=True)
        sys.exit(EXIT_UNCERTIFIED)
    click.echo(f"outcome: {report.outcome} "
               f"(correctness loss {report.final_loss_correct!r}, "
               f"accuracy loss {report.final_loss_accuracy!r}, "
               f"{report.region_count} regions)")
    click.echo(f"[took {time.perf_counter() - started:.2f}s]", err=True)
    if out is not None:
        written = save_run(out, net, region_set, report)
        click.echo(f"wrote {', '.join(written)} to {out}")
    sys.exit(EXIT_OK if report.certified else EXIT_UNCERTIFIED)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="certitrain")
def main():
    """Train ReLU networks that provably satisfy input/output properties."""


@main.command("demo")
@_train_options(default_lr=0.01, default_optimizer="sgd")
@click.option("--unsat", is_flag=True,
              help="Swap in an unsatisfiable property to show honest failure.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for report files and figures.")
def cmd_demo(lr, k, region_cap, eps_accuracy, max_epochs, optimizer, no_decay,
             seed, no_refine, threads, unsat, out):
    """Train the built-in radar-advisory example until it is certified."""
    cfg = _build_config(lr, k, region_cap, eps_accuracy, max_epochs, optimizer,
                        no_decay, seed, no_refine, threads)
    net = demo_nets.monitor_network()
    prop = demo_nets.impossible_property() if unsat else demo_nets.monitor_property()
    region_set = RegionSet.from_properties([prop])
    dataset = Dataset.empty(net.input_dim)
    _run_training(net, region_set, dataset, cfg, out)


@main.command("train")
@click.argument("network_file", type=click.Path())
@click.argument("property_file", type=click.Path())
@click.argument("dataset_file", type=click.Path())
@_train_options(default_lr=0.001, default_optimizer="adam")
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Directory for the trained network, reports, and figures.")
def cmd_train(network_file, property_file, dataset_file, lr, k, region_cap,
              eps_accuracy, max_epochs, optimizer, no_decay, seed, no_refine,
              threads, out):
    """Train NETWORK_FILE against PROPERTY_FILE on DATASET_FILE."""
    cfg = _build_config(lr, k, region_cap, eps_accuracy, max_epochs, optimizer,
                        no_decay, seed, no_refine, threads)
    try:
        net = load_network(network_file)
        props = load_properties(property_file)
        dataset = read_dataset_csv(dataset_file)
        region_set = RegionSet.from_properties(props)
        region_set.check_against(net)
        if len(dataset) and dataset.inputs.shape[1] != net.input_dim:
            raise CertitrainError("dataset feature width does not match the network")
    except OSError as exc:
        _fail_usage(exc)
    except CertitrainError as exc:
        _fail_usage(exc)
    _run_training(net, region_set, dataset, cfg, out)


@main.command("certify")
@click.argument("network_file", type=click.Path())
@click.argument("property_file", type=click.Path())
@click.option("--budget", type=int, default=1000, show_default=True,
              help="Maximum number of region splits.")
@click.option("--threads", type=int, default=1, show_default=True)
def cmd_certify(network_file, property_file, budget, threads):
    """Try to prove NETWORK_FILE satisfies PROPERTY_FILE by splitting alone."""
    try:
        net = load_network(network_file)
        props = load_properties(property_file)
        region_set = RegionSet.from_properties(props)
        result = certify(net, region_set, budget, workers=threads)
    except OSError as exc:
        _fail_usage(exc)
    except CertitrainError as exc:
        _fail_usage(exc)
    if result.certified:
        click.echo(f"certified after {result.splits_used} splits "
                   f"({len(result.region_set.regions)} regions)")
        sys.exit(EXIT_OK)
    click.echo(f"not certified within {budget} splits; "
               f"max worst-case distance {result.max_loss!r}")
    sys.exit(EXIT_UNCERTIFIED)


@main.command("audit")
@click.argument("network_file", type=click.Path())
@click.argument("property_file", type=click.Path())
@click.option("--samples", type=int, default=100000, show_default=True,
              help="Monte-Carlo samples per property.")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_audit(network_file, property_file, samples, seed):
    """Sample each property's box: check bound soundness and satisfaction."""
    if samples < 1:
        _fail_usage("--samples must be at least 1")
    try:
        net = load_network(network_file)
        props = load_properties(property_file)
        region_set = RegionSet.from_properties(props)
        region_set.check_against(net)
    except OSError as exc:
        _fail_usage(exc)
    except CertitrainError as exc:
        _fail_usage(exc)
    any_violation = False
    for index, prop in enumerate(props):
        bound_violations = sample_bound_violations(net, prop.input_box, samples,
                                                   seed + index)
        counterexamples = sample_satisfaction(net, prop.input_box, prop.output,
                                              samples, seed + index)
        status = "ok"
        if bound_violations or len(counterexamples):
            status = "VIOLATED"
            any_violation = True
        click.echo(f"property {index}: {status} "
                   f"({len(bound_violations)} bound violations, "
                   f"{len(counterexamples)} unsatisfied samples)")
        for x in counterexamples[:5]:
            click.echo(f"  counterexample input: {np.array2string(x, precision=6)}")
        for violation in bound_violations[:5]:
            click.echo(f"  bound violation at {np.array2string(violation.x, precision=6)}: "
                       f"output[{violation.coordinate}] = {violation.value!r} "
                       f"outside [{violation.lower!r}, {violation.upper!r}]")
    sys.exit(EXIT_UNCERTIFIED if any_violation else EXIT_OK)


@main.command("dataset")
@click.argument("oracle_network_file", type=click.Path())
@click.argument("property_file", type=click.Path())
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV path; the test split gets a '.test.csv' suffix.")
@click.option("--n-train", type=int, default=10000, show_default=True)
@click.option("--n-test", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--polarity", type=click.Choice(["argmax", "argmin"]), default="argmax",
              show_default=True, help="Whether the best class is the max or min score.")
def cmd_dataset(oracle_network_file, property_file, out, n_train, n_test, seed, polarity):
    """Label uniform samples from the property's input box with an oracle."""
    try:
        oracle = load_network(oracle_network_file)
        props = load_properties(property_file)
        train_set, test_set = sample_labeled_dataset(
            oracle, n_train, n_test, props[0].input_box, seed, polarity)
    except OSError as exc:
        _fail_usage(exc)
    except CertitrainError as exc:
        _fail_usage(exc)
    out = Path(out)
    write_dataset_csv(train_set, out)
    test_path = out.with_suffix(".test.csv")
    write_dataset_csv(test_set, test_path)
    click.echo(f"wrote {len(train_set)} training rows to {out} "
               f"and {len(test_set)} test rows to {test_path}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
