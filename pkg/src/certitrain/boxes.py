"""Axis-aligned boxes and sound bound propagation through a network.

The box transformers here are the interval instance of a pluggable pair
design: each concrete layer kind (affine, ReLU) has a matching bound
transformer, and :func:`forward_box` composes them in layer order.  A more
precise domain can slot in by supplying its own transformer pair and leaf
record; only boxes are implemented.

Bounds are propagated in plain 64-bit floats with no directed rounding;
soundness at float granularity is checked by sampling (see
:mod:`certitrain.sampling`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tape import BoxAffine, BoxLeaf, BoxRelu, Tape


@dataclass(frozen=True)
class Box:
    """Vector of ``[lower, upper]`` intervals; zero width is allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise ShapeError("box bounds must be matching non-empty vectors")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ShapeError("box bounds must be finite")
        if (lower > upper).any():
            raise ShapeError("box has lower > upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def widths(self):
        return self.upper - self.lower

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool((x >= self.lower - tol).all() and (x <= self.upper + tol).all())

    def contains_box(self, other, tol=0.0):
        return bool((other.lower >= self.lower - tol).all()
                    and (other.upper <= self.upper + tol).all())

    def sample(self, rng, count):
        """Uniform samples, shape (count, dim); degenerate dims stay fixed."""
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))


def affine_box(layer, box):
    """Tightest output box of an affine layer applied coordinate-wise."""
    if box.dim != layer.in_dim:
        raise ShapeError(f"box of dim {box.dim} fed to layer expecting {layer.in_dim}")
    w_pos = np.where(layer.weights >= 0.0, layer.weights, 0.0)
    w_neg = np.where(layer.weights < 0.0, layer.weights, 0.0)
    lower = w_pos @ box.lower + w_neg @ box.upper + layer.bias
    upper = w_pos @ box.upper + w_neg @ box.lower + layer.bias
    return Box(lower, upper)


def relu_box(box):
    """Clamp negative bounds to zero, preserve everything else."""
    return Box(np.maximum(box.lower, 0.0), np.maximum(box.upper, 0.0))


def box_tape(net, box):
    """Propagate a box through every layer, recording an interval tape.

    Unlike :func:`forward_box` this does not validate the output bounds,
    so diverged weights surface as a non-finite loss downstream instead
    of an error here.
    """
    if box.dim != net.input_dim:
        raise ShapeError(
            f"box of dim {box.dim} fed to a network expecting {net.input_dim}")
    tape = Tape(net)
    node = tape.append(BoxLeaf(box.lower, box.upper))
    for index, layer in enumerate(net.layers):
        node = tape.append(BoxAffine(tape, index, node))
        if layer.apply_relu:
            node = tape.append(BoxRelu(tape, node))
    tape.output_index = node
    return tape


def forward_box(net, box):
    """Propagate a box through every layer, recording an interval tape.

    Returns ``(out_box, tape)``; a scalar loss attached to the tape can be
    differentiated with respect to weights and to the input bounds.
    """
    tape = box_tape(net, box)
    lower, upper = tape.value(tape.output_index)
    return Box(lower, upper), tape


def bisect(box, dim):
    """Split at the midpoint of dimension ``dim``; children tile the box."""
    if not 0 <= dim < box.dim:
        raise ShapeError(f"dimension {dim} out of range for a {box.dim}-d box")
    if box.upper[dim] <= box.lower[dim]:
        raise ValueError(f"dimension {dim} has zero width and cannot be bisected")
    midpoint = (box.lower[dim] + box.upper[dim]) / 2.0
    left_upper = np.array(box.upper)
    left_upper[dim] = midpoint
    right_lower = np.array(box.lower)
    right_lower[dim] = midpoint
    return Box(box.lower, left_upper), Box(right_lower, box.upper)
