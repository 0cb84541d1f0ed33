"""Fully-connected ReLU networks: construction, evaluation, serialization.

A network is an ordered chain of affine layers, each optionally followed
by an element-wise ReLU; the final layer is always linear.  Evaluation
records a :class:`~certitrain.tape.Tape` so a scalar loss attached later
can be differentiated with one reverse sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError, ShapeError
from .tape import Affine, Relu, Tape, VectorLeaf

FORMAT_HEADER = "netfmt 1"


def _read_only(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LayerSpec:
    """One affine layer ``x -> W x + b`` with an optional trailing ReLU."""

    weights: np.ndarray
    bias: np.ndarray
    apply_relu: bool

    def __post_init__(self):
        weights = _read_only(self.weights)
        if weights.ndim != 2 or weights.size == 0:
            raise ShapeError("weights must be a non-empty matrix")
        bias = _read_only(self.bias)
        if bias.shape != (weights.shape[0],):
            raise ShapeError(
                f"bias of length {bias.shape} does not match {weights.shape[0]} outputs")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise ShapeError("layer parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    """A chain of layers with matching dimensions; immutable.

    ``revision`` increments on every optimizer step so cached per-region
    results can tell whether they are stale.
    """

    layers: tuple[LayerSpec, ...]
    revision: int = 0

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("a network needs at least one layer")
        for first, second in zip(layers, layers[1:]):
            if first.out_dim != second.in_dim:
                raise ShapeError(
                    f"layer of {first.out_dim} outputs feeds layer expecting {second.in_dim}")
        if layers[-1].apply_relu:
            raise ShapeError("the final layer must be linear")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def with_parameters(self, new_layers):
        """Same architecture, fresh parameters, bumped revision."""
        return Network(tuple(new_layers), self.revision + 1)


def _check_input(net, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ShapeError(
            f"input of length {x.shape[-1]} fed to a network expecting {net.input_dim}")
    if not np.isfinite(x).all():
        raise ShapeError("network input must be finite")
    return x


def forward(net, x):
    """Evaluate the network on one input vector.

    Returns ``(y, tape)`` where the tape records all intermediates.
    """
    x = _check_input(net, x)
    if x.ndim != 1:
        raise ShapeError("forward takes a single vector; use forward_values for batches")
    tape = Tape(net)
    node = tape.append(VectorLeaf(x))
    for index, layer in enumerate(net.layers):
        node = tape.append(Affine(tape, index, node))
        if layer.apply_relu:
            node = tape.append(Relu(tape, node))
    tape.output_index = node
    return np.array(tape.value(node)), tape


def forward_values(net, x):
    """Plain evaluation without a tape; accepts a vector or an (n, d) batch."""
    values = _check_input(net, x)
    for layer in net.layers:
        values = values @ layer.weights.T + layer.bias
        if layer.apply_relu:
            values = np.maximum(values, 0.0)
    return values


def batch_tape(net, x):
    """Tape over an (n, d) batch, for losses aggregated across samples."""
    x = _check_input(net, np.atleast_2d(np.asarray(x, dtype=float)))
    tape = Tape(net)
    node = tape.append(VectorLeaf(x))
    for index, layer in enumerate(net.layers):
        node = tape.append(Affine(tape, index, node))
        if layer.apply_relu:
            node = tape.append(Relu(tape, node))
    tape.output_index = node
    return tape


def random_network(layer_dims, seed, bias=False):
    """Fresh network with uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    ``layer_dims`` lists the widths, e.g. ``[2, 8, 8, 2]``; hidden layers get
    ReLU, the final layer is linear.
    """
    if len(layer_dims) < 2:
        raise ShapeError("need at least an input and an output width")
    rng = np.random.default_rng(seed)
    layers = []
    for position, (fan_in, fan_out) in enumerate(zip(layer_dims, layer_dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        weights = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        offsets = rng.uniform(-bound, bound, size=fan_out) if bias else np.zeros(fan_out)
        layers.append(LayerSpec(weights, offsets, position < len(layer_dims) - 2))
    return Network(tuple(layers))


def _format_row(values):
    return " ".join(repr(float(v)) for v in values)


def save_network(net, path):
    """Write the plain-text format; floats use shortest round-trip repr."""
    lines = [FORMAT_HEADER]
    for layer in net.layers:
        kind = "relu" if layer.apply_relu else "linear"
        lines.append(f"layer {layer.out_dim}x{layer.in_dim} {kind}")
        for row in layer.weights:
            lines.append(_format_row(row))
        lines.append(_format_row(layer.bias))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def load_network(path):
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise FileFormatError(path, f"expected header '{FORMAT_HEADER}'", line=1)

    def parse_row(line_no, expected):
        tokens = lines[line_no].split()
        if len(tokens) != expected:
            raise FileFormatError(path, f"expected {expected} numbers, got {len(tokens)}",
                                  line=line_no + 1)
        try:
            return [float(token) for token in tokens]
        except ValueError as exc:
            raise FileFormatError(path, str(exc), line=line_no + 1) from None

    layers = []
    cursor = 1
    while cursor < len(lines):
        if not lines[cursor].strip():
            cursor += 1
            continue
        parts = lines[cursor].split()
        if len(parts) != 3 or parts[0] != "layer" or parts[2] not in ("relu", "linear"):
            raise FileFormatError(path, f"malformed layer header: {lines[cursor]!r}",
                                  line=cursor + 1)
        try:
            out_dim, in_dim = (int(token) for token in parts[1].split("x"))
        except ValueError:
            raise FileFormatError(path, f"malformed layer shape: {parts[1]!r}",
                                  line=cursor + 1) from None
        cursor += 1
        rows = []
        for offset in range(out_dim):
            if cursor + offset >= len(lines):
                raise FileFormatError(path, "unexpected end of file inside layer",
                                      line=cursor + offset)
            rows.append(parse_row(cursor + offset, in_dim))
        cursor += out_dim
        if cursor >= len(lines):
            raise FileFormatError(path, "missing bias row", line=cursor)
        bias = parse_row(cursor, out_dim)
        cursor += 1
        try:
            layers.append(LayerSpec(np.array(rows), np.array(bias), parts[2] == "relu"))
        except ShapeError as exc:
            raise FileFormatError(path, str(exc), line=cursor) from None
    if not layers:
        raise FileFormatError(path, "no layers found")
    try:
        return Network(tuple(layers))
    except ShapeError as exc:
        raise FileFormatError(path, str(exc)) from None
