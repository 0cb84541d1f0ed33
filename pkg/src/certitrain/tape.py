"""Recorded forward computations and the reverse sweep over them.

A :class:`Tape` is an append-only log of operations over numpy values.
Vector records hold a single vector or an ``(n, dim)`` batch; box records
hold a ``(lower, upper)`` pair of vectors.  :func:`backward` walks the log
once in reverse and accumulates gradients for every network parameter that
participated, plus the input-box bounds when the tape started from a box.

Subgradient conventions, chosen once and used everywhere:

* ``max(x, 0)`` has gradient 0 at ``x == 0`` (the clamped branch is inert);
* a weight entry sitting exactly at 0 follows its nonnegative branch in
  the bound transformer;
* ``max``/``min`` over several scalars route the gradient to the first
  child attaining the extremum.
"""

from __future__ import annotations

import numpy as np

from .errors import TapeError


class GradientBundle:
    """Gradients mirroring a network's parameters, plus optional gradients
    with respect to the bounds of the input box that fed the tape."""

    __slots__ = ("d_weights", "d_bias", "d_input_lower", "d_input_upper")

    def __init__(self, d_weights, d_bias, d_input_lower=None, d_input_upper=None):
        self.d_weights = d_weights
        self.d_bias = d_bias
        self.d_input_lower = d_input_lower
        self.d_input_upper = d_input_upper

    @classmethod
    def for_network(cls, net, input_dim=None):
        d_w = [np.zeros_like(layer.weights) for layer in net.layers]
        d_b = [np.zeros_like(layer.bias) for layer in net.layers]
        if input_dim is None:
            return cls(d_w, d_b)
        return cls(d_w, d_b, np.zeros(input_dim), np.zeros(input_dim))

    def add_params(self, other):
        """Accumulate the weight/bias parts of ``other`` in place."""
        for mine, theirs in zip(self.d_weights, other.d_weights):
            mine += theirs
        for mine, theirs in zip(self.d_bias, other.d_bias):
            mine += theirs
        return self


class Tape:
    """Execution log for one forward computation ending in a scalar loss."""

    __slots__ = ("net", "records", "loss_index", "output_index")

    def __init__(self, net):
        self.net = net
        self.records = []
        self.loss_index = None
        self.output_index = None

    def append(self, record):
        self.records.append(record)
        return len(self.records) - 1

    def value(self, index):
        return self.records[index].value

    def mark_loss(self, index):
        value = self.records[index].value
        if not np.isscalar(value) and getattr(value, "ndim", 1) != 0:
            raise TapeError("loss node must be a scalar")
        self.loss_index = index

    @property
    def loss_value(self):
        if self.loss_index is None:
            raise TapeError("tape does not end in a scalar loss")
        return float(self.records[self.loss_index].value)

    def replay_matches(self):
        """Recompute every record from its inputs; True iff all recorded
        outputs are reproduced exactly."""
        for record in self.records:
            redone = record.recompute(self)
            if isinstance(record.value, tuple):
                if not (np.array_equal(redone[0], record.value[0])
                        and np.array_equal(redone[1], record.value[1])):
                    return False
            elif not np.array_equal(redone, record.value):
                return False
        return True


def _accumulate(adjoints, index, delta, box=False):
    if box:
        if adjoints[index] is None:
            adjoints[index] = (np.array(delta[0], dtype=float),
                               np.array(delta[1], dtype=float))
        else:
            adjoints[index] = (adjoints[index][0] + delta[0],
                               adjoints[index][1] + delta[1])
    else:
        if adjoints[index] is None:
            adjoints[index] = np.array(delta, dtype=float) if not np.isscalar(delta) else float(delta)
        else:
            adjoints[index] = adjoints[index] + delta


class VectorLeaf:
    """Concrete input: a vector or an (n, dim) batch. Not differentiated."""

    __slots__ = ("inputs", "value")

    def __init__(self, value):
        self.inputs = ()
        self.value = np.array(value, dtype=float)

    def recompute(self, tape):
        return self.value

    def backprop(self, tape, grad, adjoints, bundle):
        pass


class BoxLeaf:
    """Interval input: bound gradients flow into the bundle."""

    __slots__ = ("inputs", "value")

    def __init__(self, lower, upper):
        self.inputs = ()
        self.value = (np.array(lower, dtype=float), np.array(upper, dtype=float))

    def recompute(self, tape):
        return self.value

    def backprop(self, tape, grad, adjoints, bundle):
        g_lower, g_upper = grad
        bundle.d_input_lower += g_lower
        bundle.d_input_upper += g_upper


class Affine:
    """y = x @ W.T + b for layer ``layer_index`` of the tape's network."""

    __slots__ = ("inputs", "value", "layer_index")

    def __init__(self, tape, layer_index, src):
        self.layer_index = layer_index
        self.inputs = (src,)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        layer = tape.net.layers[self.layer_index]
        x = tape.value(self.inputs[0])
        return x @ layer.weights.T + layer.bias

    def backprop(self, tape, grad, adjoints, bundle):
        layer = tape.net.layers[self.layer_index]
        x = tape.value(self.inputs[0])
        if grad.ndim == 1:
            bundle.d_weights[self.layer_index] += np.outer(grad, x)
            bundle.d_bias[self.layer_index] += grad
        else:
            bundle.d_weights[self.layer_index] += grad.T @ x
            bundle.d_bias[self.layer_index] += grad.sum(axis=0)
        _accumulate(adjoints, self.inputs[0], grad @ layer.weights)


class Relu:
    __slots__ = ("inputs", "value")

    def __init__(self, tape, src):
        self.inputs = (src,)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        return np.maximum(tape.value(self.inputs[0]), 0.0)

    def backprop(self, tape, grad, adjoints, bundle):
        mask = tape.value(self.inputs[0]) > 0.0
        _accumulate(adjoints, self.inputs[0], grad * mask)


class BoxAffine:
    """Tightest bounds of an affine layer applied coordinate-wise to a box."""

    __slots__ = ("inputs", "value", "layer_index")

    def __init__(self, tape, layer_index, src):
        self.layer_index = layer_index
        self.inputs = (src,)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        layer = tape.net.layers[self.layer_index]
        lower, upper = tape.value(self.inputs[0])
        w_pos = np.where(layer.weights >= 0.0, layer.weights, 0.0)
        w_neg = np.where(layer.weights < 0.0, layer.weights, 0.0)
        out_lower = w_pos @ lower + w_neg @ upper + layer.bias
        out_upper = w_pos @ upper + w_neg @ lower + layer.bias
        return out_lower, out_upper

    def backprop(self, tape, grad, adjoints, bundle):
        layer = tape.net.layers[self.layer_index]
        lower, upper = tape.value(self.inputs[0])
        g_lower, g_upper = grad
        nonneg = layer.weights >= 0.0
        w_pos = np.where(nonneg, layer.weights, 0.0)
        w_neg = np.where(nonneg, 0.0, layer.weights)
        d_lower = w_pos.T @ g_lower + w_neg.T @ g_upper
        d_upper = w_neg.T @ g_lower + w_pos.T @ g_upper
        taken_pos = np.outer(g_lower, lower) + np.outer(g_upper, upper)
        taken_neg = np.outer(g_lower, upper) + np.outer(g_upper, lower)
        bundle.d_weights[self.layer_index] += np.where(nonneg, taken_pos, taken_neg)
        bundle.d_bias[self.layer_index] += g_lower + g_upper
        _accumulate(adjoints, self.inputs[0], (d_lower, d_upper), box=True)


class BoxRelu:
    __slots__ = ("inputs", "value")

    def __init__(self, tape, src):
        self.inputs = (src,)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        lower, upper = tape.value(self.inputs[0])
        return np.maximum(lower, 0.0), np.maximum(upper, 0.0)

    def backprop(self, tape, grad, adjoints, bundle):
        lower, upper = tape.value(self.inputs[0])
        g_lower, g_upper = grad
        _accumulate(adjoints, self.inputs[0],
                    (g_lower * (lower > 0.0), g_upper * (upper > 0.0)), box=True)


class SupGap:
    """sup over a box of ``a . y``, minus a threshold.

    The supremum takes the upper bound where the coefficient is nonnegative
    and the lower bound where it is negative.
    """

    __slots__ = ("inputs", "value", "coeffs", "threshold")

    def __init__(self, tape, src, coeffs, threshold):
        self.inputs = (src,)
        self.coeffs = np.array(coeffs, dtype=float)
        self.threshold = float(threshold)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        lower, upper = tape.value(self.inputs[0])
        picked = np.where(self.coeffs >= 0.0, upper, lower)
        return float(self.coeffs @ picked - self.threshold)

    def backprop(self, tape, grad, adjoints, bundle):
        nonneg = self.coeffs >= 0.0
        d_upper = grad * self.coeffs * nonneg
        d_lower = grad * self.coeffs * (~nonneg)
        _accumulate(adjoints, self.inputs[0], (d_lower, d_upper), box=True)


class HingeScale:
    """max(0, s) * coeff on a scalar node; gradient 0 at s == 0."""

    __slots__ = ("inputs", "value", "coeff")

    def __init__(self, tape, src, coeff):
        self.inputs = (src,)
        self.coeff = float(coeff)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        gap = float(tape.value(self.inputs[0]))
        if not np.isfinite(gap):
            return gap * self.coeff  # propagate divergence instead of clamping it
        return max(0.0, gap) * self.coeff

    def backprop(self, tape, grad, adjoints, bundle):
        if float(tape.value(self.inputs[0])) > 0.0:
            _accumulate(adjoints, self.inputs[0], grad * self.coeff)


class ReduceMax:
    """Hard max over scalar nodes; gradient to the first argmax child."""

    __slots__ = ("inputs", "value")

    def __init__(self, tape, srcs):
        self.inputs = tuple(srcs)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        return float(max(float(tape.value(i)) for i in self.inputs))

    def backprop(self, tape, grad, adjoints, bundle):
        values = [float(tape.value(i)) for i in self.inputs]
        winner = int(np.argmax(values))
        _accumulate(adjoints, self.inputs[winner], grad)


class ReduceMin:
    """Hard min over scalar nodes; gradient to the first argmin child."""

    __slots__ = ("inputs", "value")

    def __init__(self, tape, srcs):
        self.inputs = tuple(srcs)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        return float(min(float(tape.value(i)) for i in self.inputs))

    def backprop(self, tape, grad, adjoints, bundle):
        values = [float(tape.value(i)) for i in self.inputs]
        winner = int(np.argmin(values))
        _accumulate(adjoints, self.inputs[winner], grad)


class DotConst:
    """Scalar head c . y over a concrete vector node."""

    __slots__ = ("inputs", "value", "coeffs")

    def __init__(self, tape, src, coeffs):
        self.inputs = (src,)
        self.coeffs = np.array(coeffs, dtype=float)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        return float(self.coeffs @ tape.value(self.inputs[0]))

    def backprop(self, tape, grad, adjoints, bundle):
        _accumulate(adjoints, self.inputs[0], grad * self.coeffs)


class SoftmaxCrossEntropy:
    """Mean cross entropy of softmax(logits) against integer labels."""

    __slots__ = ("inputs", "value", "labels")

    def __init__(self, tape, src, labels):
        self.inputs = (src,)
        self.labels = np.array(labels, dtype=int)
        self.value = self.recompute(tape)

    def recompute(self, tape):
        logits = np.atleast_2d(tape.value(self.inputs[0]))
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
        picked = logits[np.arange(len(self.labels)), self.labels]
        return float(np.mean(log_z - picked))

    def backprop(self, tape, grad, adjoints, bundle):
        raw = tape.value(self.inputs[0])
        logits = np.atleast_2d(raw)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        probs[np.arange(len(self.labels)), self.labels] -= 1.0
        d_logits = probs * (grad / len(self.labels))
        if raw.ndim == 1:
            d_logits = d_logits[0]
        _accumulate(adjoints, self.inputs[0], d_logits)


def backward(tape, seed):
    """One reverse sweep; returns gradients of ``seed * loss`` w.r.t. all
    weights and biases (and input-box bounds on interval tapes)."""
    if tape.loss_index is None:
        raise TapeError("tape does not end in a scalar loss")
    seed = float(seed)
    if not np.isfinite(seed):
        raise TapeError("gradient seed must be finite")

    input_dim = None
    for record in tape.records:
        if isinstance(record, BoxLeaf):
            input_dim = record.value[0].shape[0]
            break
    bundle = GradientBundle.for_network(tape.net, input_dim)

    adjoints = [None] * len(tape.records)
    adjoints[tape.loss_index] = seed
    for index in range(len(tape.records) - 1, -1, -1):
        grad = adjoints[index]
        if grad is None:
            continue
        tape.records[index].backprop(tape, grad, adjoints, bundle)
    return bundle
