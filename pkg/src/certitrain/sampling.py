"""Independent sampling-based checkers and dataset generation.

Everything here deliberately avoids the tape and the interval engine:
these functions recompute what they check from plain forward evaluation,
so they can catch bugs in the bound propagation rather than inherit them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .boxes import forward_box
from .errors import ConfigError, FileFormatError, ShapeError
from .network import forward_values
from .properties import violation_distance_batch
from .training import Dataset

DATASET_HEADER = "# dataset-csv 1"


@dataclass(frozen=True)
class BoundViolation:
    """A sampled input whose true output escapes the claimed bounds."""

    x: np.ndarray
    coordinate: int
    value: float
    lower: float
    upper: float


def sample_bound_violations(net, box, n, seed, tol=1e-9, bounds=None):
    """Uniformly sample the box and report every output coordinate that
    falls outside the propagated bounds by more than ``tol``.

    ``bounds`` overrides the propagated output box, so a deliberately
    corrupted claim can be shown to fail (a negative control).
    """
    if n < 1:
        raise ConfigError("sample count must be at least 1")
    out_box = bounds if bounds is not None else forward_box(net, box)[0]
    rng = np.random.default_rng(seed)
    samples = box.sample(rng, n)
    outputs = forward_values(net, samples)
    below = outputs < out_box.lower - tol
    above = outputs > out_box.upper + tol
    violations = []
    for row, col in zip(*np.nonzero(below | above)):
        violations.append(BoundViolation(
            x=samples[row].copy(),
            coordinate=int(col),
            value=float(outputs[row, col]),
            lower=float(out_box.lower[col]),
            upper=float(out_box.upper[col]),
        ))
    return violations


def grid_worst_distance(net, box, predicate, resolution):
    """Max violation distance over a regular grid: a concrete lower bound
    on the worst case over the box.  Refuses more than 4 dimensions."""
    if resolution < 2:
        raise ConfigError("resolution must be at least 2 per dimension")
    if box.dim > 4:
        raise ConfigError("grid evaluation refuses dim > 4; sample instead")
    axes = [np.linspace(box.lower[d], box.upper[d], resolution) for d in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    outputs = forward_values(net, points)
    distances = violation_distance_batch(outputs, predicate)
    return float(distances.max())


def sample_satisfaction(net, box, predicate, n, seed):
    """Sample inputs and return those whose outputs violate the predicate."""
    from .properties import satisfies_batch

    if n < 1:
        raise ConfigError("sample count must be at least 1")
    rng = np.random.default_rng(seed)
    samples = box.sample(rng, n)
    outputs = forward_values(net, samples)
    ok = satisfies_batch(outputs, predicate)
    return samples[~ok]


def sample_labeled_dataset(oracle_net, n_train, n_test, box, seed, polarity="argmax"):
    """Label uniform samples with an oracle network's best-scoring class.

    ``polarity`` selects whether the best class is the max or the min
    output coordinate.
    """
    if polarity not in ("argmax", "argmin"):
        raise ConfigError(f"unknown polarity {polarity!r}")
    if box.dim != oracle_net.input_dim:
        raise ShapeError("box dimension does not match the oracle network")
    rng = np.random.default_rng(seed)

    def draw(count):
        if count == 0:
            return Dataset.empty(box.dim)
        samples = box.sample(rng, count)
        outputs = forward_values(oracle_net, samples)
        pick = np.argmax if polarity == "argmax" else np.argmin
        return Dataset(samples, pick(outputs, axis=1))

    return draw(n_train), draw(n_test)


def write_dataset_csv(dataset, path):
    dim = dataset.inputs.shape[1]
    with open(path, "w", newline="") as handle:
        handle.write(DATASET_HEADER + "\n")
        writer = csv.writer(handle)
        writer.writerow([f"x{i}" for i in range(dim)] + ["label"])
        for row, label in zip(dataset.inputs, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_dataset_csv(path):
    with open(path, newline="") as handle:
        first = handle.readline().rstrip("\n")
        if first != DATASET_HEADER:
            raise FileFormatError(path, f"expected header {DATASET_HEADER!r}", line=1)
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(path, "missing column header", line=2) from None
        if len(header) < 2 or header[-1] != "label":
            raise FileFormatError(path, "header must list features then 'label'", line=2)
        dim = len(header) - 1
        inputs, labels = [], []
        for line_no, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != dim + 1:
                raise FileFormatError(path, f"expected {dim + 1} columns, got {len(row)}",
                                      line=line_no)
            try:
                inputs.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise FileFormatError(path, str(exc), line=line_no) from None
    if not inputs:
        return Dataset.empty(dim)
    return Dataset(np.array(inputs), np.array(labels))
