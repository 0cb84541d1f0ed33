"""Gradient-descent steps over network parameters.

Updates are functional: a step returns a new :class:`Network` with a
bumped revision, leaving the input network untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .network import LayerSpec


def _stepped_layers(net, deltas):
    layers = []
    for layer, (d_weights, d_bias) in zip(net.layers, deltas):
        layers.append(LayerSpec(layer.weights - d_weights,
                                layer.bias - d_bias,
                                layer.apply_relu))
    return layers


def sgd_step(net, grads, lr):
    """Plain gradient descent: every parameter moves by ``-lr * gradient``."""
    if lr < 0:
        raise ShapeError("learning rate must be nonnegative")
    deltas = [(lr * dw, lr * db) for dw, db in zip(grads.d_weights, grads.d_bias)]
    return net.with_parameters(_stepped_layers(net, deltas))


@dataclass
class AdamState:
    """First/second moment estimates per parameter, plus the step count."""

    step_count: int
    m_weights: list
    v_weights: list
    m_bias: list
    v_bias: list

    @classmethod
    def for_network(cls, net):
        return cls(
            step_count=0,
            m_weights=[np.zeros_like(l.weights) for l in net.layers],
            v_weights=[np.zeros_like(l.weights) for l in net.layers],
            m_bias=[np.zeros_like(l.bias) for l in net.layers],
            v_bias=[np.zeros_like(l.bias) for l in net.layers],
        )


def adam_step(state, net, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update; returns the stepped network and the new state."""
    if lr < 0:
        raise ShapeError("learning rate must be nonnegative")
    t = state.step_count + 1
    new_state = AdamState(t, [], [], [], [])
    deltas = []
    for i in range(len(net.layers)):
        pairs = []
        for m_list, v_list, new_m, new_v, grad in (
            (state.m_weights, state.v_weights, new_state.m_weights,
             new_state.v_weights, grads.d_weights[i]),
            (state.m_bias, state.v_bias, new_state.m_bias,
             new_state.v_bias, grads.d_bias[i]),
        ):
            m = beta1 * m_list[i] + (1.0 - beta1) * grad
            v = beta2 * v_list[i] + (1.0 - beta2) * grad * grad
            new_m.append(m)
            new_v.append(v)
            m_hat = m / (1.0 - beta1 ** t)
            v_hat = v / (1.0 - beta2 ** t)
            pairs.append(lr * m_hat / (np.sqrt(v_hat) + eps))
        deltas.append((pairs[0], pairs[1]))
    return net.with_parameters(_stepped_layers(net, deltas)), new_state
