"""Shared fixtures and independent oracles used across the test suite."""

import numpy as np
import pytest

import certitrain as ct
from certitrain import demo
from certitrain.tape import BoxAffine, BoxRelu, HingeScale, ReduceMax, ReduceMin, Relu

SQRT2 = np.sqrt(2.0)


@pytest.fixture
def monitor_net():
    return demo.monitor_network()


@pytest.fixture
def monitor_box():
    return demo.monitor_box()


@pytest.fixture
def monitor_pred():
    return demo.report_beats_ignore()


@pytest.fixture
def monitor_prop():
    return demo.monitor_property()


def random_net(rng, in_dim=None, out_dim=None, max_layers=3, max_width=8, bias=True):
    """Random small ReLU network, weights bounded away from huge values."""
    in_dim = in_dim or int(rng.integers(1, 5))
    out_dim = out_dim or int(rng.integers(1, 5))
    depth = int(rng.integers(1, max_layers + 1))
    widths = [in_dim] + [int(rng.integers(1, max_width + 1)) for _ in range(depth - 1)]
    widths.append(out_dim)
    return ct.random_network(widths, seed=int(rng.integers(0, 2**31)), bias=bias)


def random_box(rng, dim, center_scale=2.0, max_width=3.0):
    center = rng.uniform(-center_scale, center_scale, dim)
    half = rng.uniform(0.05, max_width / 2.0, dim)
    return ct.Box(center - half, center + half)


def random_atom(rng, out_dim):
    a = np.zeros(out_dim)
    while not a.any():
        a = np.round(rng.uniform(-2, 2, out_dim), 3)
    return ct.Atom(a, float(np.round(rng.uniform(-3, 3), 3)))


def random_predicate(rng, out_dim, depth=2):
    roll = rng.random()
    if depth == 0 or roll < 0.4:
        atom = random_atom(rng, out_dim)
        return ct.negate(atom) if rng.random() < 0.3 else atom
    children = tuple(random_predicate(rng, out_dim, depth - 1)
                     for _ in range(int(rng.integers(2, 4))))
    return ct.And(children) if roll < 0.7 else ct.Or(children)


def perturbed(net, layer_index, which, index, delta):
    """Copy of ``net`` with one parameter entry nudged by ``delta``."""
    layers = list(net.layers)
    layer = layers[layer_index]
    if which == "w":
        weights = np.array(layer.weights)
        weights[index] += delta
        layers[layer_index] = ct.LayerSpec(weights, layer.bias, layer.apply_relu)
    else:
        bias = np.array(layer.bias)
        bias[index] += delta
        layers[layer_index] = ct.LayerSpec(layer.weights, bias, layer.apply_relu)
    return ct.Network(tuple(layers))


def fd_param_gradient(loss_of_net, net, layer_index, which, index, step=1e-5):
    """Central finite difference of a scalar loss in one parameter."""
    plus = loss_of_net(perturbed(net, layer_index, which, index, step))
    minus = loss_of_net(perturbed(net, layer_index, which, index, -step))
    return (plus - minus) / (2.0 * step)


def gradient_close(analytic, numeric, rel=1e-4, absolute=1e-6):
    if abs(analytic) < absolute and abs(numeric) < absolute:
        return True
    return abs(analytic - numeric) <= rel * max(abs(analytic), abs(numeric), 1e-12)


def tape_fd_safe(tape, guard=1e-3):
    """True when no recorded value sits close enough to a kink or tie for
    a finite-difference probe to land on the other branch."""
    for record in tape.records:
        if isinstance(record, Relu):
            pre = np.asarray(tape.value(record.inputs[0]))
            if np.abs(pre).min(initial=np.inf) < guard:
                return False
        elif isinstance(record, BoxRelu):
            lower, upper = tape.value(record.inputs[0])
            if min(np.abs(lower).min(), np.abs(upper).min()) < guard:
                return False
        elif isinstance(record, BoxAffine):
            weights = tape.net.layers[record.layer_index].weights
            if np.abs(weights).min() < guard:
                return False
        elif isinstance(record, HingeScale):
            if abs(float(tape.value(record.inputs[0]))) < guard:
                return False
        elif isinstance(record, (ReduceMax, ReduceMin)):
            values = sorted(float(tape.value(i)) for i in record.inputs)
            best_pair = values[-2:] if isinstance(record, ReduceMax) else values[:2]
            if len(best_pair) == 2 and abs(best_pair[1] - best_pair[0]) < guard:
                return False
    return True


def brute_force_box_output(net, box):
    """Independent interval propagation, written differently from the
    library path: per-neuron loops over enumerated corner choices."""
    lower = np.array(box.lower, dtype=float)
    upper = np.array(box.upper, dtype=float)
    for layer in net.layers:
        out_lower = np.empty(layer.out_dim)
        out_upper = np.empty(layer.out_dim)
        for j in range(layer.out_dim):
            lo = hi = float(layer.bias[j])
            for i in range(layer.in_dim):
                w = float(layer.weights[j, i])
                lo += min(w * lower[i], w * upper[i])
                hi += max(w * lower[i], w * upper[i])
            out_lower[j], out_upper[j] = lo, hi
        if layer.apply_relu:
            out_lower = np.maximum(out_lower, 0.0)
            out_upper = np.maximum(out_upper, 0.0)
        lower, upper = out_lower, out_upper
    return lower, upper


def brute_force_atom_worst(lower, upper, atom):
    """Worst violation distance of one atom over a box, via corner
    enumeration of the linear form."""
    best = float(atom.b)
    sup = sum(max(c * lo, c * hi) for c, lo, hi in zip(atom.a, lower, upper))
    return max(0.0, sup - best) / atom.norm
